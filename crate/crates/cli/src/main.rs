//! Batch front door for the kitchen scheduling engine: optimize scenario
//! files, validate them, enumerate tiny instances exactly, or serve the
//! optimizer over a TCP broker.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;

use clap::{Args, Parser, Subcommand};

use kitchenforge_core::metrics::controlled_metrics_for;
use kitchenforge_core::moead::{run, MoeadParams};
use kitchenforge_core::oracle::{enumerate_pareto, EnumerationBudget};
use kitchenforge_core::outputs::{gantt_chart, gnuplot_script, pareto_csv};
use kitchenforge_core::service::{OptimizationService, ScheduleReport, TcpBrokerServer, Topic, Topics};
use kitchenforge_core::{KitchenTwin, Scenario};

const EXIT_PARSE: u8 = 1;
const EXIT_INFEASIBLE: u8 = 2;

#[derive(Parser)]
#[command(name = "kitchenforge", version, about = "Multi-objective cooking process planning and scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate the Pareto front of a scenario and write CSV, plot
    /// script, schedule report and Gantt chart.
    Optimize(OptimizeArgs),
    /// Parse and validate a scenario, printing its expansion and the
    /// controlled-metric domains.
    Validate(ValidateArgs),
    /// Enumerate the exact Pareto set of a tiny scenario.
    Oracle(OracleArgs),
    /// Serve optimization requests over a TCP message broker.
    Serve(ServeArgs),
}

#[derive(Args)]
struct OptimizeArgs {
    /// Scenario document to optimize.
    #[arg(long)]
    scenario: PathBuf,
    /// Random seed; runs with equal inputs are byte-identical.
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    generations: Option<u32>,
    /// Weight-lattice granularity H; the population is C(H+2, 2).
    #[arg(long = "pop-granularity")]
    pop_granularity: Option<u32>,
    /// Neighborhood size T.
    #[arg(long)]
    neighbors: Option<usize>,
    #[arg(long = "mutation-rate")]
    mutation_rate: Option<f64>,
    /// Directory for pareto.csv, pareto.gnuplot, report.txt and gantt.txt.
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    scenario: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    scenario: PathBuf,
    /// Enumeration budget in combinations.
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
}

#[derive(Args)]
struct ServeArgs {
    /// Bind address; falls back to KITCHENFORGE_BROKER_ADDR, then
    /// 127.0.0.1:7878.
    #[arg(long = "broker-addr")]
    broker_addr: Option<String>,
    /// Topic namespace: <prefix>.requests/.archive/.reports/.errors.
    #[arg(long = "topic-prefix", default_value = "kitchen")]
    topic_prefix: String,
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Optimize(args) => cmd_optimize(&args),
        Command::Validate(args) => cmd_validate(&args),
        Command::Oracle(args) => cmd_oracle(&args),
        Command::Serve(args) => cmd_serve(&args),
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        ExitCode::from(EXIT_PARSE)
    })?;
    Scenario::load(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_PARSE)
    })
}

fn params_from(
    seed: u64,
    generations: Option<u32>,
    pop_granularity: Option<u32>,
    neighbors: Option<usize>,
    mutation_rate: Option<f64>,
) -> MoeadParams {
    let defaults = MoeadParams::default();
    MoeadParams {
        weight_granularity: pop_granularity.unwrap_or(defaults.weight_granularity),
        neighborhood: neighbors.unwrap_or(defaults.neighborhood),
        generations: generations.unwrap_or(defaults.generations),
        mutation_rate,
        seed,
    }
}

fn cmd_optimize(args: &OptimizeArgs) -> ExitCode {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    for line in &scenario.order {
        if line.amount_g > 0.0 && !scenario.recipes.iter().any(|r| r.food == line.food) {
            eprintln!(
                "error: ordered food \"{}\" has no recipe that produces it",
                line.food
            );
            return ExitCode::from(EXIT_INFEASIBLE);
        }
    }
    let params = params_from(
        args.seed,
        args.generations,
        args.pop_granularity,
        args.neighbors,
        args.mutation_rate,
    );
    let outcome = match run(&scenario, &params) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_PARSE);
        }
    };
    let twin = KitchenTwin::new(&scenario);
    let (report, gantt) = match outcome.knee_point() {
        Some(entry) => {
            let schedule = twin.decode(&entry.chromosome);
            (
                ScheduleReport::from_schedule(&twin, &schedule, None).render(),
                gantt_chart(&twin, &schedule),
            )
        }
        None => (String::new(), String::new()),
    };

    if let Err(e) = std::fs::create_dir_all(&args.out_dir) {
        eprintln!("error: cannot create {}: {e}", args.out_dir.display());
        return ExitCode::from(EXIT_PARSE);
    }
    let write = |name: &str, contents: &str| -> Result<(), ExitCode> {
        let path = args.out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| {
            eprintln!("error: cannot write {}: {e}", path.display());
            ExitCode::from(EXIT_PARSE)
        })
    };
    let files = [
        ("pareto.csv", pareto_csv(&outcome.archive)),
        ("pareto.gnuplot", gnuplot_script("pareto.csv")),
        ("report.txt", report),
        ("gantt.txt", gantt),
    ];
    for (name, contents) in &files {
        if let Err(code) = write(name, contents) {
            return code;
        }
    }
    println!(
        "pareto front: {} points in {:.3} s ({} evaluations)",
        outcome.archive.len(),
        outcome.stats.wall.as_secs_f64(),
        outcome.stats.evaluations
    );
    println!("outputs in {}", args.out_dir.display());
    ExitCode::SUCCESS
}

fn cmd_validate(args: &ValidateArgs) -> ExitCode {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let slots = scenario.expand_instances();
    println!("recipes: {}", scenario.recipes.len());
    println!("food types: {}", scenario.food_types().len());
    println!("resources: {}", scenario.resources.len());
    println!("exclusion groups: {}", scenario.exclusion_groups.len());
    println!("instance slots: {}", slots.len());
    println!();
    println!("exclusion groups:");
    for group in &scenario.exclusion_groups {
        println!("  {}", group.zones.join(", "));
    }
    println!();
    println!("instance slots:");
    for slot in &slots {
        println!("  {}", slot.name);
    }
    println!();
    println!("controlled metrics:");
    for record in controlled_metrics_for(&scenario) {
        println!("{}", record.serialize());
    }
    ExitCode::SUCCESS
}

fn cmd_oracle(args: &OracleArgs) -> ExitCode {
    let scenario = match load_scenario(&args.scenario) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let budget = EnumerationBudget {
        max_combinations: args.budget,
    };
    match enumerate_pareto(&scenario, budget) {
        Ok(front) => {
            println!("makespan_min,energy_kj,deficiency,cost_eur");
            for v in front {
                println!(
                    "{},{},{},{}",
                    v.makespan_min, v.energy_kj, v.deficiency, v.cost_eur
                );
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_PARSE)
        }
    }
}

fn cmd_serve(args: &ServeArgs) -> ExitCode {
    let addr = args
        .broker_addr
        .clone()
        .or_else(|| std::env::var("KITCHENFORGE_BROKER_ADDR").ok())
        .unwrap_or_else(|| "127.0.0.1:7878".to_string());
    let server = match TcpBrokerServer::bind(addr.as_str()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot bind {addr}: {e}");
            return ExitCode::from(EXIT_PARSE);
        }
    };
    let topic = |suffix: &str| Topic::new(&format!("{}.{suffix}", args.topic_prefix));
    let topics = match (
        topic("requests"),
        topic("archive"),
        topic("reports"),
        topic("errors"),
    ) {
        (Ok(requests), Ok(archive), Ok(reports), Ok(errors)) => Topics {
            requests,
            archive,
            reports,
            errors,
        },
        _ => {
            eprintln!("error: invalid topic prefix \"{}\"", args.topic_prefix);
            return ExitCode::from(EXIT_PARSE);
        }
    };
    println!("listening on {}", server.local_addr());
    println!(
        "topics: {} {} {} {}",
        topics.requests, topics.archive, topics.reports, topics.errors
    );
    let stop = AtomicBool::new(false);
    let mut service = OptimizationService::new();
    match service.serve(&server.broker(), &topics, &stop) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_PARSE)
        }
    }
}
