//! Textual metric records and their interpretation.
//!
//! Three record kinds share one bracket grammar: key objectives to be
//! optimised, controlled metrics the optimizer may mutate, and observable
//! metrics that report kitchen state changes (resource availability, measured
//! cooking durations). This module parses and serializes the records and maps
//! observables onto scenario effects.

mod parse;

pub use parse::parse_record;

use std::collections::HashMap;

use thiserror::Error;

use crate::scenario::{Scenario, NO_ALLOCATION};
use crate::Minutes;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("byte {offset}: unbalanced bracket")]
    UnbalancedBracket { offset: usize },
    #[error("byte {offset}: unknown record head \"{head}\"")]
    UnknownHead { offset: usize, head: String },
    #[error("byte {offset}: missing required field \"{field}\"")]
    MissingField { offset: usize, field: String },
    #[error("byte {offset}: {message}")]
    Malformed { offset: usize, message: String },
    #[error("observable \"{name}\" does not match a known pattern")]
    UnmappedObservable { name: String },
    #[error("record \"{name}\" is not an observable metric")]
    NotObservable { name: String },
    #[error("invalid override: {message}")]
    InvalidOverride { message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    Controlled,
    Observable,
    KeyObjective,
}

impl MetricKind {
    pub fn head(self) -> &'static str {
        match self {
            MetricKind::Controlled => "ControlledMetricType",
            MetricKind::Observable => "ObservableMetricType",
            MetricKind::KeyObjective => "KeyObjectiveType",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ValueType {
    /// An ordered domain of nominal values.
    Nominal { name: String, values: Vec<String> },
    /// An integer range; observables use min == max to report a single value.
    Integer { min: i64, max: i64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleRate {
    EventDriven,
}

/// Parsed form of one metric record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetricRecord {
    pub kind: MetricKind,
    pub name: String,
    pub value_type: ValueType,
    pub units: String,
    pub sample_rate: Option<SampleRate>,
}

impl MetricRecord {
    /// Canonical single-line wire form. Parsing it back yields a record
    /// structurally equal to `self`.
    pub fn serialize(&self) -> String {
        let mut out = String::new();
        out.push_str(self.kind.head());
        out.push_str("[name=");
        out.push_str(&self.name);
        out.push_str(",valueType=");
        match &self.value_type {
            ValueType::Nominal { name, values } => {
                debug_assert!(!values.is_empty(), "nominal domain must be non-empty");
                out.push_str("ValueType.Nominal[name=");
                out.push_str(name);
                out.push_str(",values={");
                out.push_str(&values.join(", "));
                out.push_str("},typ=NOMINAL]");
            }
            ValueType::Integer { min, max } => {
                out.push_str(&format!("ValueType.Integer[min={min},max={max},typ=INT]"));
            }
        }
        out.push_str(",units=");
        out.push_str(if self.units.is_empty() { "n/a" } else { &self.units });
        if let Some(SampleRate::EventDriven) = self.sample_rate {
            out.push_str(",sampleRate=SampleRate.EventDriven[]");
        }
        out.push(']');
        out
    }
}

/// A scenario reconfiguration derived from observable metrics.
#[derive(Debug, Clone, PartialEq)]
pub enum ObservableEffect {
    /// The zone accepts no further allocations.
    ResourceUnavailable { zone: String },
    /// Measured cooking time for (recipe, zone, pot); the effective main-task
    /// duration is `end_min - start_min`, the start value being a preparation
    /// offset.
    DurationOverride {
        recipe: String,
        zone: String,
        pot: String,
        start_min: Minutes,
        end_min: Minutes,
    },
    /// Recipe quality changed from user feedback.
    QualityUpdate { recipe: String, deficiency: f64 },
}

/// Maps observable records onto effects, joining start/end halves of
/// duration overrides by their "<recipe> <zone> <pot>" key.
#[derive(Debug, Default)]
pub struct ObservableInterpreter {
    pending: HashMap<String, (Option<i64>, Option<i64>)>,
}

impl ObservableInterpreter {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of duration-override halves still waiting for their pair.
    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    /// Interprets one observable record. Returns `Ok(None)` for records that
    /// carry no immediate effect: the start or end half of an unmatched
    /// duration override, or an availability value that leaves the resource
    /// available.
    pub fn interpret(
        &mut self,
        record: &MetricRecord,
    ) -> Result<Option<ObservableEffect>, ProtocolError> {
        if record.kind != MetricKind::Observable {
            return Err(ProtocolError::NotObservable {
                name: record.name.clone(),
            });
        }
        if let Some(zone) = record.name.strip_suffix(" availability") {
            return match record.value_type {
                ValueType::Integer { min: 0, max: 0 } => {
                    Ok(Some(ObservableEffect::ResourceUnavailable {
                        zone: zone.trim().to_string(),
                    }))
                }
                // Any other reported availability leaves the resource usable,
                // which is the default state.
                ValueType::Integer { .. } => Ok(None),
                _ => Err(ProtocolError::UnmappedObservable {
                    name: record.name.clone(),
                }),
            };
        }
        for (suffix, is_start) in [(" start", true), (" end", false)] {
            let Some(key) = record.name.strip_suffix(suffix) else {
                continue;
            };
            let value = match record.value_type {
                ValueType::Integer { min, max } if min == max && min >= 0 => min,
                _ => {
                    return Err(ProtocolError::UnmappedObservable {
                        name: record.name.clone(),
                    })
                }
            };
            let key = key.trim().to_string();
            let entry = self.pending.entry(key.clone()).or_default();
            if is_start {
                entry.0 = Some(value);
            } else {
                entry.1 = Some(value);
            }
            if let (Some(start), Some(end)) = *entry {
                self.pending.remove(&key);
                return Self::complete_override(&key, start, end).map(Some);
            }
            return Ok(None);
        }
        Err(ProtocolError::UnmappedObservable {
            name: record.name.clone(),
        })
    }

    fn complete_override(
        key: &str,
        start: i64,
        end: i64,
    ) -> Result<ObservableEffect, ProtocolError> {
        if end < start {
            return Err(ProtocolError::InvalidOverride {
                message: format!("{key}: end {end} before start {start}"),
            });
        }
        let tokens: Vec<&str> = key.split_whitespace().collect();
        if tokens.len() < 3 {
            return Err(ProtocolError::UnmappedObservable {
                name: key.to_string(),
            });
        }
        let pot = tokens[tokens.len() - 1].to_string();
        let zone = tokens[tokens.len() - 2].to_string();
        let recipe = tokens[..tokens.len() - 2].join(" ");
        Ok(ObservableEffect::DurationOverride {
            recipe,
            zone,
            pot,
            start_min: start as Minutes,
            end_min: end as Minutes,
        })
    }
}

/// One controlled metric per instance slot: the slot's allocation, whose
/// nominal domain is its compatible resources plus the no-allocation
/// sentinel, always last. Resources disabled by unavailability effects are
/// omitted from the domains.
pub fn controlled_metrics_for(scenario: &Scenario) -> Vec<MetricRecord> {
    scenario
        .expand_instances()
        .iter()
        .map(|slot| {
            let mut values: Vec<String> = scenario
                .compatible_resources(slot.recipe)
                .into_iter()
                .map(|i| scenario.resources[i].display_name())
                .collect();
            values.push(NO_ALLOCATION.to_string());
            MetricRecord {
                kind: MetricKind::Controlled,
                name: format!("{} allocation", slot.name),
                value_type: ValueType::Nominal {
                    name: format!("{} allocation type", slot.name),
                    values,
                },
                units: "n/a".to_string(),
                sample_rate: None,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{Recipe, ScenarioBuilder};

    // Sample records as they appear on the wire, line wraps and all.
    pub(crate) const CONTROLLED_SAMPLE_A: &str = "ControlledMetricType[name=Boiled water A 0,
allocation,valueType=ValueType.Nominal[name=
Boiled water A 0 allocation type ,values={Hob(1)
Pot(1), Hob(2) Pot(1), Hob(3) Pot(1), Hob(4) Pot(1),
No allocation},typ=NOMINAL]]";

    pub(crate) const CONTROLLED_SAMPLE_B: &str = "ControlledMetricType[name= Boiled water B 0
allocation,valueType=ValueType.Nominal[name=
Boiled water B 0 allocation type ,values={Hob(5)
Pot(2), Hob(6) Pot(2), No Allocation},typ=NOMINAL],
units=n/a]";

    pub(crate) const OBSERVABLE_AVAILABILITY: &str = "ObservableMetricType[name= Hob(6) availability,
valueType=ValueType.Integer[min=0,max=0,typ=INT],
units=n/a,sampleRate=SampleRate.EventDriven[]]";

    pub(crate) const OBSERVABLE_START: &str = "ObservableMetricType[name=Boiled water A Hob(1)
Pot(1) start, valueType=ValueType.Integer[min=0,
max=0,typ=INT]]";

    pub(crate) const OBSERVABLE_END: &str = "ObservableMetricType[name=Boiled water A Hob(1)
Pot(1) end, valueType=ValueType.Integer[min=40,
max=40,typ=INT]]";

    #[test]
    fn controlled_sample_a_parses() {
        let r = parse_record(CONTROLLED_SAMPLE_A).unwrap();
        assert_eq!(r.kind, MetricKind::Controlled);
        assert_eq!(r.name, "Boiled water A 0 allocation");
        match &r.value_type {
            ValueType::Nominal { name, values } => {
                assert_eq!(name, "Boiled water A 0 allocation type");
                assert_eq!(values.len(), 5);
                assert_eq!(values[0], "Hob(1) Pot(1)");
                assert_eq!(values.last().unwrap(), "No allocation");
            }
            other => panic!("unexpected value type {other:?}"),
        }
        assert_eq!(r.units, "n/a");
    }

    #[test]
    fn observable_availability_parses() {
        let r = parse_record(OBSERVABLE_AVAILABILITY).unwrap();
        assert_eq!(r.kind, MetricKind::Observable);
        assert_eq!(r.name, "Hob(6) availability");
        assert_eq!(r.value_type, ValueType::Integer { min: 0, max: 0 });
        assert_eq!(r.sample_rate, Some(SampleRate::EventDriven));
    }

    #[test]
    fn unbalanced_record_is_an_error() {
        match parse_record("ControlledMetricType[name=x") {
            Err(ProtocolError::UnbalancedBracket { offset }) => {
                assert_eq!(offset, "ControlledMetricType".len());
            }
            other => panic!("expected unbalanced bracket, got {other:?}"),
        }
    }

    #[test]
    fn unknown_head_is_an_error() {
        assert!(matches!(
            parse_record("MysteryMetricType[name=x]"),
            Err(ProtocolError::UnknownHead { .. })
        ));
    }

    #[test]
    fn missing_value_type_is_an_error() {
        assert!(matches!(
            parse_record("ControlledMetricType[name=x]"),
            Err(ProtocolError::MissingField { .. })
        ));
    }

    #[test]
    fn round_trip_preserves_value_order() {
        for sample in [CONTROLLED_SAMPLE_A, CONTROLLED_SAMPLE_B] {
            let r = parse_record(sample).unwrap();
            let reparsed = parse_record(&r.serialize()).unwrap();
            assert_eq!(r, reparsed);
        }
    }

    #[test]
    fn round_trip_observables() {
        for sample in [OBSERVABLE_AVAILABILITY, OBSERVABLE_START, OBSERVABLE_END] {
            let r = parse_record(sample).unwrap();
            assert_eq!(r, parse_record(&r.serialize()).unwrap());
        }
    }

    #[test]
    fn empty_units_serialize_as_not_applicable() {
        let r = MetricRecord {
            kind: MetricKind::KeyObjective,
            name: "makespan".into(),
            value_type: ValueType::Integer { min: 0, max: 10 },
            units: String::new(),
            sample_rate: None,
        };
        assert!(r.serialize().contains("units=n/a"));
    }

    #[test]
    fn availability_maps_to_unavailable() {
        let mut interp = ObservableInterpreter::new();
        let r = parse_record(OBSERVABLE_AVAILABILITY).unwrap();
        let effect = interp.interpret(&r).unwrap().unwrap();
        assert_eq!(
            effect,
            ObservableEffect::ResourceUnavailable {
                zone: "Hob(6)".into()
            }
        );
    }

    #[test]
    fn nonzero_availability_has_no_effect() {
        let mut interp = ObservableInterpreter::new();
        let r = MetricRecord {
            kind: MetricKind::Observable,
            name: "Hob(6) availability".into(),
            value_type: ValueType::Integer { min: 1, max: 1 },
            units: "n/a".into(),
            sample_rate: None,
        };
        assert_eq!(interp.interpret(&r).unwrap(), None);
    }

    #[test]
    fn start_and_end_pair_into_duration_override() {
        let mut interp = ObservableInterpreter::new();
        let start = parse_record(OBSERVABLE_START).unwrap();
        let end = parse_record(OBSERVABLE_END).unwrap();
        assert_eq!(interp.interpret(&start).unwrap(), None);
        assert_eq!(interp.pending(), 1);
        let effect = interp.interpret(&end).unwrap().unwrap();
        assert_eq!(
            effect,
            ObservableEffect::DurationOverride {
                recipe: "Boiled water A".into(),
                zone: "Hob(1)".into(),
                pot: "Pot(1)".into(),
                start_min: 0,
                end_min: 40,
            }
        );
        assert_eq!(interp.pending(), 0);
    }

    #[test]
    fn lone_half_stays_pending() {
        let mut interp = ObservableInterpreter::new();
        let start = parse_record(OBSERVABLE_START).unwrap();
        assert_eq!(interp.interpret(&start).unwrap(), None);
        assert_eq!(interp.pending(), 1);
    }

    #[test]
    fn unrecognized_observable_name_is_flagged() {
        let mut interp = ObservableInterpreter::new();
        let r = MetricRecord {
            kind: MetricKind::Observable,
            name: "door temperature".into(),
            value_type: ValueType::Integer { min: 3, max: 3 },
            units: "C".into(),
            sample_rate: None,
        };
        assert!(matches!(
            interp.interpret(&r),
            Err(ProtocolError::UnmappedObservable { .. })
        ));
    }

    fn water_scenario() -> crate::scenario::Scenario {
        let recipe = |variant: &str, zones: &[&str], pot: &str, amount: f64| Recipe {
            food: "Boiled water".into(),
            variant: variant.into(),
            predecessor: None,
            amount_g: amount,
            zones: zones.iter().map(|z| z.to_string()).collect(),
            pot: pot.into(),
            energy_kj: 350.0,
            duration_min: 15,
            cost_eur: 0.03,
            deficiency: 5.0,
        };
        ScenarioBuilder::new()
            .standard_hob("Hob")
            .recipe(recipe(
                "A",
                &["Hob(1)", "Hob(2)", "Hob(3)", "Hob(4)"],
                "Pot(1)",
                1000.0,
            ))
            .recipe(recipe("B", &["Hob(5)", "Hob(6)"], "Pot(2)", 2000.0))
            .order("Boiled water", 2000.0)
            .build()
            .unwrap()
    }

    #[test]
    fn controlled_metric_domains() {
        let s = water_scenario();
        let records = controlled_metrics_for(&s);
        // 2 slots of A (2000/1000) and 1 of B.
        assert_eq!(records.len(), 3);
        let a0 = &records[0];
        assert_eq!(a0.name, "Boiled water A 0 allocation");
        match &a0.value_type {
            ValueType::Nominal { values, .. } => {
                assert_eq!(
                    values,
                    &[
                        "Hob(1) Pot(1)",
                        "Hob(2) Pot(1)",
                        "Hob(3) Pot(1)",
                        "Hob(4) Pot(1)",
                        "No allocation"
                    ]
                );
            }
            other => panic!("unexpected value type {other:?}"),
        }
        let b0 = &records[2];
        assert_eq!(b0.name, "Boiled water B 0 allocation");
        match &b0.value_type {
            ValueType::Nominal { values, .. } => {
                assert_eq!(values, &["Hob(5) Pot(2)", "Hob(6) Pot(2)", "No allocation"]);
            }
            other => panic!("unexpected value type {other:?}"),
        }
    }

    #[test]
    fn unavailable_zone_leaves_the_domain() {
        let mut s = water_scenario();
        s.overrides.push(ObservableEffect::ResourceUnavailable {
            zone: "Hob(6)".into(),
        });
        let before: Vec<String> = match &controlled_metrics_for(&water_scenario())[2].value_type {
            ValueType::Nominal { values, .. } => values.clone(),
            _ => unreachable!(),
        };
        let after: Vec<String> = match &controlled_metrics_for(&s)[2].value_type {
            ValueType::Nominal { values, .. } => values.clone(),
            _ => unreachable!(),
        };
        let removed: Vec<_> = before.iter().filter(|v| !after.contains(v)).collect();
        assert_eq!(removed, ["Hob(6) Pot(2)"]);
    }

    #[test]
    fn no_allocation_is_last_and_unique() {
        let s = water_scenario();
        for record in controlled_metrics_for(&s) {
            let ValueType::Nominal { values, .. } = &record.value_type else {
                panic!("controlled metrics must be nominal");
            };
            let count = values
                .iter()
                .filter(|v| crate::scenario::is_no_allocation(v))
                .count();
            assert_eq!(count, 1);
            assert!(crate::scenario::is_no_allocation(values.last().unwrap()));
        }
    }
}
