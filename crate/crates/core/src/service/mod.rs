//! Optimization-as-a-service loop.
//!
//! Requests arrive on a broker topic as a scenario document optionally
//! extended with `[request]` (id and parameter overrides) and `[observable]`
//! sections (one wire record each). The service runs the optimizer, publishes
//! the whole archive and a rendered schedule report for the knee point, and
//! re-optimizes the retained scenario whenever further observables arrive.
//! Malformed requests get an error reply; the loop stays alive.

mod broker;
mod report;

pub use broker::{
    read_frame, write_frame, Broker, BrokerError, InProcessBroker, StreamEvent, Subscription,
    TcpBroker, TcpBrokerServer, Topic, SUBSCRIBE_TOPIC,
};
pub use report::{ReportBlock, ReportEntry, ReportError, ScheduleReport};

use std::sync::atomic::{AtomicBool, Ordering};
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::metrics::{
    parse_record, MetricRecord, ObservableEffect, ObservableInterpreter, ProtocolError,
};
use crate::moead::{EngineError, MoeadParams, RunOutcome};
use crate::scenario::{parse_sections, Scenario, ScenarioError, Section};
use crate::twin::KitchenTwin;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error("observable received before any scenario")]
    NoScenario,
    #[error("request payload is not UTF-8")]
    NotUtf8,
}

/// Topic names the service listens and replies on.
#[derive(Debug, Clone)]
pub struct Topics {
    pub requests: Topic,
    pub archive: Topic,
    pub reports: Topic,
    pub errors: Topic,
}

impl Default for Topics {
    fn default() -> Self {
        Topics {
            requests: Topic::new("kitchen.requests").expect("static topic"),
            archive: Topic::new("kitchen.archive").expect("static topic"),
            reports: Topic::new("kitchen.reports").expect("static topic"),
            errors: Topic::new("kitchen.errors").expect("static topic"),
        }
    }
}

/// A parsed request payload.
#[derive(Debug, Clone)]
pub struct OptimizationRequest {
    pub id: Option<String>,
    pub scenario: Option<Scenario>,
    pub observables: Vec<MetricRecord>,
    pub params: ParamOverrides,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ParamOverrides {
    pub seed: Option<u64>,
    pub generations: Option<u32>,
    pub weight_granularity: Option<u32>,
    pub neighborhood: Option<usize>,
    pub mutation_rate: Option<f64>,
}

impl ParamOverrides {
    fn apply(&self, base: MoeadParams) -> MoeadParams {
        MoeadParams {
            weight_granularity: self.weight_granularity.unwrap_or(base.weight_granularity),
            neighborhood: self.neighborhood.unwrap_or(base.neighborhood),
            generations: self.generations.unwrap_or(base.generations),
            mutation_rate: self.mutation_rate.or(base.mutation_rate),
            seed: self.seed.unwrap_or(base.seed),
        }
    }
}

/// Splits a payload into the request envelope and the scenario document.
pub fn parse_request(payload: &str) -> Result<OptimizationRequest, ServiceError> {
    let sections = parse_sections(payload)?;
    let mut scenario_sections: Vec<Section> = Vec::new();
    let mut observables = Vec::new();
    let mut id = None;
    let mut params = ParamOverrides::default();
    for section in sections {
        match section.name.as_str() {
            "request" => {
                for (key, value, line) in &section.fields {
                    let bad = |what: &str| ScenarioError::Parse {
                        line: *line,
                        message: format!("bad {what} \"{value}\""),
                    };
                    match key.as_str() {
                        "id" => id = Some(value.clone()),
                        "seed" => params.seed = Some(value.parse().map_err(|_| bad("seed"))?),
                        "generations" => {
                            params.generations =
                                Some(value.parse().map_err(|_| bad("generations"))?)
                        }
                        "pop_granularity" => {
                            params.weight_granularity =
                                Some(value.parse().map_err(|_| bad("pop_granularity"))?)
                        }
                        "neighbors" => {
                            params.neighborhood =
                                Some(value.parse().map_err(|_| bad("neighbors"))?)
                        }
                        "mutation_rate" => {
                            params.mutation_rate =
                                Some(value.parse().map_err(|_| bad("mutation_rate"))?)
                        }
                        other => {
                            return Err(ScenarioError::Parse {
                                line: *line,
                                message: format!("unknown [request] field \"{other}\""),
                            }
                            .into())
                        }
                    }
                }
            }
            "observable" => {
                for (key, value, line) in &section.fields {
                    if key != "record" {
                        return Err(ScenarioError::Parse {
                            line: *line,
                            message: format!("unknown [observable] field \"{key}\""),
                        }
                        .into());
                    }
                    observables.push(parse_record(value)?);
                }
            }
            _ => scenario_sections.push(section),
        }
    }
    let scenario = if scenario_sections.is_empty() {
        None
    } else {
        Some(Scenario::from_sections(&scenario_sections)?)
    };
    Ok(OptimizationRequest {
        id,
        scenario,
        observables,
        params,
    })
}

/// Best-effort request id extraction for error replies.
pub fn peek_request_id(payload: &str) -> Option<String> {
    let mut in_request = false;
    for line in payload.lines() {
        let line = line.trim();
        if line.starts_with('[') {
            in_request = line == "[request]";
            continue;
        }
        if in_request {
            if let Some(id) = line.strip_prefix("id=") {
                return Some(id.trim().to_string());
            }
        }
    }
    None
}

/// What one handled request produces.
#[derive(Debug, Clone)]
pub struct RequestOutcome {
    pub request_id: String,
    pub run: RunOutcome,
    pub report: ScheduleReport,
}

struct Retained {
    scenario: Scenario,
    effects: Vec<ObservableEffect>,
    params: MoeadParams,
}

/// Request handler with the retained-scenario state. One request is processed
/// at a time; optimization is internally parallel.
pub struct OptimizationService {
    interpreter: ObservableInterpreter,
    retained: Option<Retained>,
    auto_ids: u64,
}

impl Default for OptimizationService {
    fn default() -> Self {
        Self::new()
    }
}

impl OptimizationService {
    pub fn new() -> Self {
        OptimizationService {
            interpreter: ObservableInterpreter::new(),
            retained: None,
            auto_ids: 0,
        }
    }

    /// Applies a request payload: parses it, folds observables into the
    /// retained scenario, runs the optimizer and renders the knee-point
    /// report with the measured wall time.
    pub fn handle_request(&mut self, payload: &str) -> Result<RequestOutcome, ServiceError> {
        let started = Instant::now();
        let request = parse_request(payload)?;

        let mut new_effects = Vec::new();
        for record in &request.observables {
            if let Some(effect) = self.interpreter.interpret(record)? {
                new_effects.push(effect);
            }
        }

        if let Some(scenario) = request.scenario {
            let params = request.params.apply(MoeadParams {
                seed: scenario.rng_seed,
                ..MoeadParams::default()
            });
            self.retained = Some(Retained {
                scenario,
                effects: Vec::new(),
                params,
            });
        }
        let retained = self.retained.as_mut().ok_or(ServiceError::NoScenario)?;
        retained.effects.extend(new_effects);
        retained.params = request.params.apply(retained.params);

        let mut scenario = retained.scenario.clone();
        scenario.overrides.extend(retained.effects.iter().cloned());
        scenario.validate()?;

        let run = crate::moead::run(&scenario, &retained.params)?;
        let twin = KitchenTwin::new(&scenario);
        let report = match run.knee_point() {
            Some(entry) => {
                let schedule = twin.decode(&entry.chromosome);
                ScheduleReport::from_schedule(
                    &twin,
                    &schedule,
                    Some(started.elapsed().as_secs_f64()),
                )
            }
            None => ScheduleReport {
                wall_seconds: Some(started.elapsed().as_secs_f64()),
                status: "Succeeded.".into(),
                blocks: Vec::new(),
                makespan_min: 0,
            },
        };
        let request_id = match request.id {
            Some(id) => id,
            None => {
                self.auto_ids += 1;
                format!("auto-{}", self.auto_ids)
            }
        };
        Ok(RequestOutcome {
            request_id,
            run,
            report,
        })
    }

    /// Serves requests from the broker until `stop` is set or the request
    /// stream closes. Every message gets exactly one reply: the archive on
    /// success or an error record; reports are published alongside archives.
    pub fn serve(
        &mut self,
        broker: &dyn Broker,
        topics: &Topics,
        stop: &AtomicBool,
    ) -> Result<(), ServiceError> {
        let mut requests = broker.subscribe(&topics.requests)?;
        while !stop.load(Ordering::SeqCst) {
            match requests.next_timeout(Duration::from_millis(50)) {
                StreamEvent::Timeout => continue,
                StreamEvent::Closed => break,
                StreamEvent::Message(payload) => {
                    let text = String::from_utf8_lossy(&payload);
                    match self.handle_request(&text) {
                        Ok(outcome) => {
                            let twin =
                                KitchenTwin::new(&self.working_scenario().expect("just ran"));
                            let archive =
                                render_archive(&outcome.request_id, &outcome.run, &twin);
                            broker.publish(&topics.archive, archive.as_bytes())?;
                            broker
                                .publish(&topics.reports, outcome.report.render().as_bytes())?;
                        }
                        Err(e) => {
                            let id = peek_request_id(&text).unwrap_or_else(|| "unknown".into());
                            let reply = format!("request_id={id}\nerror: {e}\n");
                            broker.publish(&topics.errors, reply.as_bytes())?;
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// The retained scenario with all accumulated effects applied.
    pub fn working_scenario(&self) -> Option<Scenario> {
        self.retained.as_ref().map(|r| {
            let mut s = r.scenario.clone();
            s.overrides.extend(r.effects.iter().cloned());
            s
        })
    }
}

/// Line-oriented archive payload: a request id, a point count, then per point
/// one objective line and one `slot=allocation@priority` line per slot.
pub fn render_archive(request_id: &str, run: &RunOutcome, twin: &KitchenTwin) -> String {
    let mut out = String::new();
    out.push_str(&format!("request_id={request_id}\n"));
    out.push_str(&format!("points={}\n", run.archive.len()));
    for entry in run.archive.sorted() {
        let v = &entry.objectives;
        out.push_str(&format!(
            "objective: m={} e={} d={} c={}\n",
            v.makespan_min, v.energy_kj, v.deficiency, v.cost_eur
        ));
        for (i, slot) in twin.slots().iter().enumerate() {
            let gene = entry.chromosome.genes[i];
            out.push_str(&format!(
                "{}={}@{}\n",
                slot.name,
                twin.allocation_display(i, gene),
                gene.priority
            ));
        }
    }
    out
}

/// One archive point parsed back from the wire.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchivePoint {
    pub makespan_min: u64,
    pub energy_kj: f64,
    pub deficiency: f64,
    pub cost_eur: f64,
    pub allocations: Vec<(String, String, u32)>,
}

/// Parsed archive payload.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchivePayload {
    pub request_id: String,
    pub points: Vec<ArchivePoint>,
}

pub fn parse_archive(text: &str) -> Result<ArchivePayload, ServiceError> {
    let bad = |line: usize, message: String| {
        ServiceError::Scenario(ScenarioError::Parse { line, message })
    };
    let mut request_id = None;
    let mut declared = None;
    let mut points: Vec<ArchivePoint> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(id) = line.strip_prefix("request_id=") {
            request_id = Some(id.to_string());
            continue;
        }
        if let Some(n) = line.strip_prefix("points=") {
            declared = Some(
                n.parse::<usize>()
                    .map_err(|_| bad(line_no, format!("bad point count \"{n}\"")))?,
            );
            continue;
        }
        if let Some(rest) = line.strip_prefix("objective:") {
            let mut point = ArchivePoint {
                makespan_min: 0,
                energy_kj: 0.0,
                deficiency: 0.0,
                cost_eur: 0.0,
                allocations: Vec::new(),
            };
            for part in rest.split_whitespace() {
                let (key, value) = part
                    .split_once('=')
                    .ok_or_else(|| bad(line_no, format!("bad objective field \"{part}\"")))?;
                let parse_err = || bad(line_no, format!("bad objective value \"{value}\""));
                match key {
                    "m" => point.makespan_min = value.parse().map_err(|_| parse_err())?,
                    "e" => point.energy_kj = value.parse().map_err(|_| parse_err())?,
                    "d" => point.deficiency = value.parse().map_err(|_| parse_err())?,
                    "c" => point.cost_eur = value.parse().map_err(|_| parse_err())?,
                    other => return Err(bad(line_no, format!("unknown objective \"{other}\""))),
                }
            }
            points.push(point);
            continue;
        }
        let (slot, rest) = line
            .split_once('=')
            .ok_or_else(|| bad(line_no, format!("expected slot=allocation@priority: {line}")))?;
        let (allocation, priority) = rest
            .rsplit_once('@')
            .ok_or_else(|| bad(line_no, format!("missing @priority in \"{rest}\"")))?;
        let priority: u32 = priority
            .parse()
            .map_err(|_| bad(line_no, format!("bad priority \"{priority}\"")))?;
        let point = points
            .last_mut()
            .ok_or_else(|| bad(line_no, "allocation before any objective line".into()))?;
        point
            .allocations
            .push((slot.to_string(), allocation.to_string(), priority));
    }
    let payload = ArchivePayload {
        request_id: request_id
            .ok_or_else(|| bad(1, "missing request_id".into()))?,
        points,
    };
    if let Some(n) = declared {
        if n != payload.points.len() {
            return Err(bad(
                1,
                format!("declared {n} points, found {}", payload.points.len()),
            ));
        }
    }
    Ok(payload)
}
