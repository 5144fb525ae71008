//! Schedule report rendering and parsing.
//!
//! The textual report lists, per resource, the scheduled intervals in
//! half-open `[start,end)` notation: main tasks under their slot name,
//! pre-cooking subtasks with a `_1` suffix, and changeovers as
//! `DependentSetUp from <A> to <B>`. Rendering is deterministic and the text
//! parses back into an equivalent report, so the format is round-trippable.

use thiserror::Error;

use crate::twin::{KitchenTwin, Schedule, ScheduleStatus, TaskKind};
use crate::Minutes;

#[derive(Debug, Error)]
#[error("report line {line}: {message}")]
pub struct ReportError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReportEntry {
    Task {
        name: String,
        start: Minutes,
        end: Minutes,
    },
    Setup {
        from: String,
        to: String,
        start: Minutes,
        end: Minutes,
    },
}

impl ReportEntry {
    fn render(&self) -> String {
        match self {
            ReportEntry::Task { name, start, end } => format!("{name} [{start},{end})"),
            ReportEntry::Setup {
                from,
                to,
                start,
                end,
            } => format!("DependentSetUp from {from} to {to} [{start},{end})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportBlock {
    pub resource: String,
    pub entries: Vec<ReportEntry>,
}

/// String-level form of a rendered schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleReport {
    /// Optimisation wall time; omitted from deterministic outputs.
    pub wall_seconds: Option<f64>,
    /// Status text, e.g. "Succeeded.".
    pub status: String,
    /// Per-resource listings sorted by resource name.
    pub blocks: Vec<ReportBlock>,
    pub makespan_min: Minutes,
}

impl ScheduleReport {
    pub fn from_schedule(
        twin: &KitchenTwin,
        schedule: &Schedule,
        wall_seconds: Option<f64>,
    ) -> ScheduleReport {
        let scenario = twin.scenario();
        let mut blocks: Vec<ReportBlock> = Vec::new();
        for (resource, tasks) in schedule.tasks.iter().enumerate() {
            if tasks.is_empty() {
                continue;
            }
            let entries = tasks
                .iter()
                .map(|t| match t.kind {
                    TaskKind::Main { slot } => ReportEntry::Task {
                        name: twin.slots()[slot].name.clone(),
                        start: t.start,
                        end: t.end,
                    },
                    TaskKind::Subtask { slot } => ReportEntry::Task {
                        name: format!("{}_1", twin.slots()[slot].name),
                        start: t.start,
                        end: t.end,
                    },
                    TaskKind::Setup { from, to } => ReportEntry::Setup {
                        from: scenario.recipes[from].name(),
                        to: scenario.recipes[to].name(),
                        start: t.start,
                        end: t.end,
                    },
                })
                .collect();
            blocks.push(ReportBlock {
                resource: scenario.resources[resource].display_name(),
                entries,
            });
        }
        blocks.sort_by(|a, b| a.resource.cmp(&b.resource));
        let status = match &schedule.status {
            ScheduleStatus::Succeeded => "Succeeded.".to_string(),
            ScheduleStatus::Infeasible { reason } => format!("Infeasible: {reason}."),
        };
        ScheduleReport {
            wall_seconds,
            status,
            blocks,
            makespan_min: schedule.makespan(),
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        if let Some(seconds) = self.wall_seconds {
            out.push_str(&format!("Optimisation took: {seconds:.3} seconds\n"));
        }
        out.push_str(&format!("Schedule: Status: {}\n", self.status));
        for block in &self.blocks {
            out.push('\n');
            out.push_str(&format!("{} -> [\n", block.resource));
            for (i, entry) in block.entries.iter().enumerate() {
                let comma = if i + 1 < block.entries.len() { "," } else { "" };
                out.push_str(&format!("{}{comma}\n", entry.render()));
            }
            out.push_str("]\n");
        }
        let h = self.makespan_min / 60;
        let m = self.makespan_min % 60;
        out.push_str(&format!("\nmakespan: {h:02}:{m:02}:00\n"));
        out
    }

    pub fn parse(text: &str) -> Result<ScheduleReport, ReportError> {
        let fail = |line: usize, message: &str| ReportError {
            line,
            message: message.to_string(),
        };
        let mut wall_seconds = None;
        let mut status = None;
        let mut blocks: Vec<ReportBlock> = Vec::new();
        let mut open_block: Option<ReportBlock> = None;
        let mut makespan_min = None;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix("Optimisation took: ") {
                let seconds = rest
                    .strip_suffix(" seconds")
                    .ok_or_else(|| fail(line_no, "expected \"... seconds\""))?;
                wall_seconds = Some(
                    seconds
                        .parse()
                        .map_err(|_| fail(line_no, "bad wall time"))?,
                );
                continue;
            }
            if let Some(rest) = line.strip_prefix("Schedule: Status: ") {
                status = Some(rest.to_string());
                continue;
            }
            if let Some(rest) = line.strip_prefix("makespan: ") {
                let mut parts = rest.split(':');
                let (Some(h), Some(m), Some(s)) = (parts.next(), parts.next(), parts.next())
                else {
                    return Err(fail(line_no, "expected makespan: HH:MM:SS"));
                };
                let h: Minutes = h.parse().map_err(|_| fail(line_no, "bad hours"))?;
                let m: Minutes = m.parse().map_err(|_| fail(line_no, "bad minutes"))?;
                let s: Minutes = s.parse().map_err(|_| fail(line_no, "bad seconds"))?;
                if s != 0 {
                    return Err(fail(line_no, "model time has whole-minute resolution"));
                }
                makespan_min = Some(h * 60 + m);
                continue;
            }
            if let Some(resource) = line.strip_suffix(" -> [") {
                if open_block.is_some() {
                    return Err(fail(line_no, "nested resource block"));
                }
                open_block = Some(ReportBlock {
                    resource: resource.to_string(),
                    entries: Vec::new(),
                });
                continue;
            }
            if line == "]" {
                let block = open_block
                    .take()
                    .ok_or_else(|| fail(line_no, "unmatched ']'"))?;
                blocks.push(block);
                continue;
            }
            let block = open_block
                .as_mut()
                .ok_or_else(|| fail(line_no, "task line outside a resource block"))?;
            block
                .entries
                .push(parse_entry(line.trim_end_matches(','), line_no)?);
        }
        if open_block.is_some() {
            return Err(fail(text.lines().count(), "unterminated resource block"));
        }
        Ok(ScheduleReport {
            wall_seconds,
            status: status.ok_or_else(|| fail(1, "missing status line"))?,
            blocks,
            makespan_min: makespan_min.ok_or_else(|| fail(1, "missing makespan line"))?,
        })
    }
}

fn parse_entry(line: &str, line_no: usize) -> Result<ReportEntry, ReportError> {
    let fail = |message: &str| ReportError {
        line: line_no,
        message: message.to_string(),
    };
    let open = line
        .rfind(" [")
        .ok_or_else(|| fail("expected \"<name> [start,end)\""))?;
    let name = line[..open].to_string();
    let interval = line[open + 2..]
        .strip_suffix(')')
        .ok_or_else(|| fail("interval must end with ')'"))?;
    let (start, end) = interval
        .split_once(',')
        .ok_or_else(|| fail("interval must be start,end"))?;
    let start: Minutes = start.trim().parse().map_err(|_| fail("bad start"))?;
    let end: Minutes = end.trim().parse().map_err(|_| fail("bad end"))?;
    if let Some(rest) = name.strip_prefix("DependentSetUp from ") {
        let (from, to) = rest
            .split_once(" to ")
            .ok_or_else(|| fail("setup must name both recipes"))?;
        return Ok(ReportEntry::Setup {
            from: from.to_string(),
            to: to.to_string(),
            start,
            end,
        });
    }
    Ok(ReportEntry::Task { name, start, end })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ScheduleReport {
        ScheduleReport {
            wall_seconds: Some(19.942),
            status: "Succeeded.".into(),
            blocks: vec![ReportBlock {
                resource: "Hob(2) Pot(1)".into(),
                entries: vec![
                    ReportEntry::Task {
                        name: "Beef A 2_1".into(),
                        start: 188,
                        end: 200,
                    },
                    ReportEntry::Task {
                        name: "Beef A 2".into(),
                        start: 692,
                        end: 812,
                    },
                    ReportEntry::Setup {
                        from: "Beef A".into(),
                        to: "Boiled water A".into(),
                        start: 812,
                        end: 822,
                    },
                ],
            }],
            makespan_min: 1319,
        }
    }

    #[test]
    fn renders_the_expected_lines() {
        let text = sample().render();
        assert!(text.starts_with("Optimisation took: 19.942 seconds\n"));
        assert!(text.contains("Schedule: Status: Succeeded.\n"));
        assert!(text.contains("Hob(2) Pot(1) -> [\n"));
        assert!(text.contains("Beef A 2 [692,812),\n"));
        assert!(text.contains("DependentSetUp from Beef A to Boiled water A [812,822)\n"));
        assert!(text.ends_with("makespan: 21:59:00\n"));
    }

    #[test]
    fn parse_render_is_a_fixed_point() {
        let report = sample();
        let text = report.render();
        let parsed = ScheduleReport::parse(&text).unwrap();
        assert_eq!(parsed, report);
        assert_eq!(parsed.render(), text);
    }

    #[test]
    fn empty_schedule_report() {
        let report = ScheduleReport {
            wall_seconds: None,
            status: "Succeeded.".into(),
            blocks: vec![],
            makespan_min: 0,
        };
        let text = report.render();
        assert_eq!(text, "Schedule: Status: Succeeded.\n\nmakespan: 00:00:00\n");
        assert_eq!(ScheduleReport::parse(&text).unwrap(), report);
    }

    #[test]
    fn malformed_reports_are_rejected() {
        assert!(ScheduleReport::parse("makespan: 00:00:00\n").is_err());
        assert!(ScheduleReport::parse("Schedule: Status: Succeeded.\n").is_err());
        let unterminated = "Schedule: Status: Succeeded.\n\nHob(1) Pot(1) -> [\n";
        assert!(ScheduleReport::parse(unterminated).is_err());
    }
}
