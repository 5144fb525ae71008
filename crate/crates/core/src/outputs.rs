//! Batch output rendering: Pareto CSV, a plot script for it, and an ASCII
//! Gantt timeline. All outputs are pure functions of their inputs.

use crate::moead::ParetoArchive;
use crate::twin::{KitchenTwin, Schedule, TaskKind};

/// CSV of the archive in canonical order (makespan, energy, deficiency).
pub fn pareto_csv(archive: &ParetoArchive) -> String {
    let mut out = String::from("makespan_min,energy_kj,deficiency,cost_eur\n");
    for entry in archive.sorted() {
        let v = &entry.objectives;
        out.push_str(&format!(
            "{},{},{},{}\n",
            v.makespan_min, v.energy_kj, v.deficiency, v.cost_eur
        ));
    }
    out
}

/// gnuplot script scattering the three optimized objectives from a CSV.
pub fn gnuplot_script(csv_name: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set xlabel 'makespan (min)'\n\
         set ylabel 'energy (kJ)'\n\
         set zlabel 'deficiency'\n\
         set ticslevel 0\n\
         set grid\n\
         splot '{csv_name}' every ::1 using 1:2:3 with points pt 7 title 'pareto front'\n\
         pause -1 'press enter to close'\n"
    )
}

const GANTT_WIDTH: u64 = 80;

/// Per-resource ASCII timeline: `=` main tasks, `-` subtasks, `+` setups.
pub fn gantt_chart(twin: &KitchenTwin, schedule: &Schedule) -> String {
    let makespan = schedule.makespan();
    let scale = (makespan.max(1)).div_ceil(GANTT_WIDTH).max(1);
    let mut out = format!(
        "makespan {makespan} min, 1 column = {scale} min ('=' main, '-' subtask, '+' setup)\n"
    );
    let names: Vec<String> = twin
        .scenario()
        .resources
        .iter()
        .map(|r| r.display_name())
        .collect();
    let width = names.iter().map(String::len).max().unwrap_or(0);
    for (resource, name) in names.iter().enumerate() {
        let mut row = vec![b' '; GANTT_WIDTH as usize];
        for task in &schedule.tasks[resource] {
            let glyph = match task.kind {
                TaskKind::Main { .. } => b'=',
                TaskKind::Subtask { .. } => b'-',
                TaskKind::Setup { .. } => b'+',
            };
            let from = (task.start / scale) as usize;
            let to = (task.end.div_ceil(scale) as usize).min(GANTT_WIDTH as usize);
            for cell in &mut row[from..to.max(from + 1).min(GANTT_WIDTH as usize)] {
                *cell = glyph;
            }
        }
        out.push_str(&format!(
            "{name:width$} |{}|\n",
            String::from_utf8(row).expect("ascii")
        ));
    }
    out
}
