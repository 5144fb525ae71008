//! Sectioned key/value grammar for scenario documents.
//!
//! A document is a sequence of `[section]` headers, each followed by
//! `key=value` lines. Blank lines and `#` comments are ignored. Values are
//! trimmed but keep internal spaces, so food names like "Meat (beef)" need no
//! quoting. Service payloads reuse the same section layer, so this parser is
//! deliberately independent of scenario semantics.

use std::collections::HashMap;

use super::{build_standard_hob, OrderLine, Recipe, Scenario, ScenarioError};
use crate::metrics::ObservableEffect;

/// One `[name]` block with its fields in document order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Section {
    pub name: String,
    pub line: usize,
    pub fields: Vec<(String, String, usize)>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, v, _)| v.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, ScenarioError> {
        self.get(key).ok_or_else(|| ScenarioError::Parse {
            line: self.line,
            message: format!("[{}] section is missing field \"{key}\"", self.name),
        })
    }
}

/// Splits a document into sections. Purely lexical; no cross-references.
pub fn parse_sections(text: &str) -> Result<Vec<Section>, ScenarioError> {
    let mut sections: Vec<Section> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name.strip_suffix(']').ok_or_else(|| ScenarioError::Parse {
                line: line_no,
                message: "section header is missing closing ']'".into(),
            })?;
            let name = name.trim();
            if name.is_empty() {
                return Err(ScenarioError::Parse {
                    line: line_no,
                    message: "empty section name".into(),
                });
            }
            sections.push(Section {
                name: name.to_string(),
                line: line_no,
                fields: Vec::new(),
            });
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(ScenarioError::Parse {
                line: line_no,
                message: format!("expected key=value, got \"{line}\""),
            });
        };
        let section = sections.last_mut().ok_or_else(|| ScenarioError::Parse {
            line: line_no,
            message: "field before the first section header".into(),
        })?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(ScenarioError::Parse {
                line: line_no,
                message: "empty field key".into(),
            });
        }
        if section.get(&key).is_some() {
            return Err(ScenarioError::Parse {
                line: line_no,
                message: format!("duplicate field \"{key}\" in [{}]", section.name),
            });
        }
        section
            .fields
            .push((key, value.trim().to_string(), line_no));
    }
    Ok(sections)
}

fn parse_num<T: std::str::FromStr>(
    section: &Section,
    key: &str,
) -> Result<T, ScenarioError> {
    let value = section.require(key)?;
    value.parse().map_err(|_| {
        let line = section
            .fields
            .iter()
            .find(|(k, _, _)| k == key)
            .map(|(_, _, l)| *l)
            .unwrap_or(section.line);
        ScenarioError::Parse {
            line,
            message: format!("field \"{key}\": cannot parse \"{value}\" as a number"),
        }
    })
}

fn known_keys(section: &Section, allowed: &[&str]) -> Result<(), ScenarioError> {
    for (k, _, line) in &section.fields {
        if !allowed.contains(&k.as_str()) {
            return Err(ScenarioError::Parse {
                line: *line,
                message: format!("unknown field \"{k}\" in [{}]", section.name),
            });
        }
    }
    Ok(())
}

fn split_name(section: &Section, name: &str) -> Result<(String, String), ScenarioError> {
    match name.rsplit_once(' ') {
        Some((food, variant)) if !food.trim().is_empty() && !variant.trim().is_empty() => {
            Ok((food.trim().to_string(), variant.trim().to_string()))
        }
        _ => Err(ScenarioError::Parse {
            line: section.line,
            message: format!("recipe name \"{name}\" must be \"<food> <variant>\""),
        }),
    }
}

fn comma_list(value: &str) -> Vec<String> {
    value
        .split(',')
        .map(|z| z.trim().to_string())
        .filter(|z| !z.is_empty())
        .collect()
}

impl Scenario {
    /// Assembles and validates a scenario from parsed sections.
    pub fn from_sections(sections: &[Section]) -> Result<Scenario, ScenarioError> {
        let mut scenario = Scenario::default();
        for section in sections {
            match section.name.as_str() {
                "config" => {
                    known_keys(section, &["setup_duration_min", "seed"])?;
                    if section.get("setup_duration_min").is_some() {
                        scenario.setup_duration = parse_num(section, "setup_duration_min")?;
                    }
                    if section.get("seed").is_some() {
                        scenario.rng_seed = parse_num(section, "seed")?;
                    }
                }
                "resource" => {
                    known_keys(section, &["zone", "pot"])?;
                    scenario.resources.push(super::Resource {
                        zone: section.require("zone")?.to_string(),
                        pot: section.require("pot")?.to_string(),
                    });
                }
                "hob" => {
                    known_keys(section, &["label"])?;
                    let (resources, groups) = build_standard_hob(section.require("label")?);
                    scenario.resources.extend(resources);
                    scenario.exclusion_groups.extend(groups);
                }
                "exclusion" => {
                    known_keys(section, &["zones"])?;
                    scenario.exclusion_groups.push(super::ExclusionGroup {
                        zones: comma_list(section.require("zones")?),
                    });
                }
                "recipe" => {
                    known_keys(
                        section,
                        &[
                            "name",
                            "predecessor",
                            "amount_g",
                            "duration_min",
                            "energy_kj",
                            "cost_eur",
                            "deficiency",
                            "zones",
                            "pot",
                        ],
                    )?;
                    let (food, variant) = split_name(section, section.require("name")?)?;
                    let predecessor = section
                        .get("predecessor")
                        .map(|p| split_name(section, p))
                        .transpose()?;
                    scenario.recipes.push(Recipe {
                        food,
                        variant,
                        predecessor,
                        amount_g: parse_num(section, "amount_g")?,
                        zones: comma_list(section.require("zones")?),
                        pot: section.require("pot")?.to_string(),
                        energy_kj: parse_num(section, "energy_kj")?,
                        duration_min: parse_num(section, "duration_min")?,
                        cost_eur: parse_num(section, "cost_eur")?,
                        deficiency: parse_num(section, "deficiency")?,
                    });
                }
                "order" => {
                    known_keys(section, &["food", "amount_g"])?;
                    scenario.order.push(OrderLine {
                        food: section.require("food")?.to_string(),
                        amount_g: parse_num(section, "amount_g")?,
                    });
                }
                "override" => {
                    scenario.overrides.push(parse_override(section)?);
                }
                other => {
                    return Err(ScenarioError::Parse {
                        line: section.line,
                        message: format!("unknown section [{other}]"),
                    });
                }
            }
        }
        scenario.validate()?;
        Ok(scenario)
    }
}

fn parse_override(section: &Section) -> Result<ObservableEffect, ScenarioError> {
    let keys: HashMap<&str, &str> = section
        .fields
        .iter()
        .map(|(k, v, _)| (k.as_str(), v.as_str()))
        .collect();
    if keys.contains_key("unavailable") {
        known_keys(section, &["unavailable"])?;
        return Ok(ObservableEffect::ResourceUnavailable {
            zone: keys["unavailable"].to_string(),
        });
    }
    if keys.contains_key("start_min") || keys.contains_key("end_min") {
        known_keys(section, &["recipe", "zone", "pot", "start_min", "end_min"])?;
        return Ok(ObservableEffect::DurationOverride {
            recipe: section.require("recipe")?.to_string(),
            zone: section.require("zone")?.to_string(),
            pot: section.require("pot")?.to_string(),
            start_min: parse_num(section, "start_min")?,
            end_min: parse_num(section, "end_min")?,
        });
    }
    if keys.contains_key("deficiency") {
        known_keys(section, &["recipe", "deficiency"])?;
        return Ok(ObservableEffect::QualityUpdate {
            recipe: section.require("recipe")?.to_string(),
            deficiency: parse_num(section, "deficiency")?,
        });
    }
    Err(ScenarioError::Parse {
        line: section.line,
        message: "[override] must be an unavailability, a duration override or a quality update"
            .into(),
    })
}
