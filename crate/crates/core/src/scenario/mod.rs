//! Problem domain model: recipes, resources, orders, exclusion groups, and
//! the scenario file format that ties them together.
//!
//! A [`Scenario`] is immutable after load and safe to share read-only across
//! concurrent evaluators.

mod parse;

pub use parse::{parse_sections, Section};

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::metrics::ObservableEffect;
use crate::Minutes;

/// Default changeover interval between different productions on one resource.
pub const DEFAULT_SETUP_DURATION: Minutes = 10;

/// Nominal-domain sentinel meaning a slot is not executed at all.
pub const NO_ALLOCATION: &str = "No allocation";

/// Returns true when `value` is the no-allocation sentinel. The comparison is
/// case-insensitive because feeds are inconsistent about the capitalization.
pub fn is_no_allocation(value: &str) -> bool {
    value.eq_ignore_ascii_case(NO_ALLOCATION)
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("recipe {recipe}: unknown predecessor \"{predecessor}\"")]
    UnknownPredecessor { recipe: String, predecessor: String },
    #[error("recipe {recipe}: unknown zone \"{zone}\"")]
    UnknownZone { recipe: String, zone: String },
    #[error("recipe {recipe}: zone {zone} has no resource usable with {pot}")]
    ZonePotMismatch {
        recipe: String,
        zone: String,
        pot: String,
    },
    #[error("predecessor cycle involving recipe {recipe}")]
    PredecessorCycle { recipe: String },
    #[error("{0}")]
    Invalid(String),
}

/// One way of cooking a food type: a (food, variant) pair plus its execution
/// parameters. `variant` distinguishes alternative recipes for one food.
#[derive(Debug, Clone, PartialEq)]
pub struct Recipe {
    pub food: String,
    pub variant: String,
    /// (food, variant) of the recipe whose output this recipe consumes.
    pub predecessor: Option<(String, String)>,
    /// Grams produced per execution.
    pub amount_g: f64,
    /// Compatible cooking zone names, in catalog order.
    pub zones: Vec<String>,
    /// Pot type required on the zone, e.g. "Pot(1)".
    pub pot: String,
    pub energy_kj: f64,
    pub duration_min: Minutes,
    pub cost_eur: f64,
    pub deficiency: f64,
}

impl Recipe {
    /// Display name, e.g. "Boiled water A".
    pub fn name(&self) -> String {
        format!("{} {}", self.food, self.variant)
    }

    pub fn predecessor_name(&self) -> Option<String> {
        self.predecessor.as_ref().map(|(f, v)| format!("{f} {v}"))
    }
}

/// A schedulable resource: a cooking zone paired with the pot type it hosts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resource {
    pub zone: String,
    pub pot: String,
}

impl Resource {
    /// Protocol-facing name: exactly the zone name, one space, the pot name.
    pub fn display_name(&self) -> String {
        format!("{} {}", self.zone, self.pot)
    }
}

/// Zones that cannot carry overlapping task intervals because they share
/// physical heating elements. Exclusion is pairwise within a group.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExclusionGroup {
    pub zones: Vec<String>,
}

/// One requested food quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderLine {
    pub food: String,
    pub amount_g: f64,
}

/// A fully validated optimization problem instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub recipes: Vec<Recipe>,
    pub resources: Vec<Resource>,
    pub exclusion_groups: Vec<ExclusionGroup>,
    pub order: Vec<OrderLine>,
    pub setup_duration: Minutes,
    pub overrides: Vec<ObservableEffect>,
    pub rng_seed: u64,
}

/// One potential execution of a specific recipe, named "<food> <variant> <index>".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InstanceSlot {
    pub recipe: usize,
    pub instance: usize,
    pub name: String,
}

impl Scenario {
    /// Parses and validates a scenario document.
    pub fn load(text: &str) -> Result<Scenario, ScenarioError> {
        let sections = parse_sections(text)?;
        Scenario::from_sections(&sections)
    }

    pub fn recipe_index(&self, food: &str, variant: &str) -> Option<usize> {
        self.recipes
            .iter()
            .position(|r| r.food == food && r.variant == variant)
    }

    pub fn recipe_index_by_name(&self, name: &str) -> Option<usize> {
        self.recipes.iter().position(|r| r.name() == name)
    }

    pub fn resource_index(&self, zone: &str, pot: &str) -> Option<usize> {
        self.resources
            .iter()
            .position(|r| r.zone == zone && r.pot == pot)
    }

    /// Distinct food type names in catalog order.
    pub fn food_types(&self) -> Vec<&str> {
        let mut seen = HashSet::new();
        let mut out = Vec::new();
        for r in &self.recipes {
            if seen.insert(r.food.as_str()) {
                out.push(r.food.as_str());
            }
        }
        out
    }

    pub fn ordered_amount(&self, food: &str) -> f64 {
        self.order
            .iter()
            .filter(|l| l.food == food)
            .map(|l| l.amount_g)
            .sum()
    }

    /// Zones disabled by `ResourceUnavailable` overrides.
    pub fn unavailable_zones(&self) -> BTreeSet<&str> {
        self.overrides
            .iter()
            .filter_map(|e| match e {
                ObservableEffect::ResourceUnavailable { zone } => Some(zone.as_str()),
                _ => None,
            })
            .collect()
    }

    /// Resources a recipe may be allocated to, in catalog resource order,
    /// with unavailable zones filtered out.
    pub fn compatible_resources(&self, recipe: usize) -> Vec<usize> {
        let r = &self.recipes[recipe];
        let down = self.unavailable_zones();
        self.resources
            .iter()
            .enumerate()
            .filter(|(_, res)| {
                res.pot == r.pot
                    && r.zones.contains(&res.zone)
                    && !down.contains(res.zone.as_str())
            })
            .map(|(i, _)| i)
            .collect()
    }

    /// Expands the catalog against the order into instance slots.
    ///
    /// Each recipe whose food is ordered gets `ceil(ordered / amount)` slots.
    /// A recipe whose food is unordered gets slots only when it is the
    /// predecessor of slotted recipes: one per successor slot, the maximum
    /// demand the successors could impose.
    pub fn expand_instances(&self) -> Vec<InstanceSlot> {
        let n = self.recipes.len();
        let mut counts = vec![0u64; n];
        for (i, r) in self.recipes.iter().enumerate() {
            let ordered = self.ordered_amount(&r.food);
            if ordered > 0.0 {
                counts[i] = (ordered / r.amount_g).ceil() as u64;
            }
        }
        // Demand propagation to unordered predecessors. The predecessor graph
        // is acyclic (validated at load), so n passes reach the fixpoint.
        for _ in 0..n {
            let mut changed = false;
            for (i, r) in self.recipes.iter().enumerate() {
                if self.ordered_amount(&r.food) > 0.0 {
                    continue;
                }
                let demand: u64 = self
                    .recipes
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| {
                        s.predecessor
                            .as_ref()
                            .is_some_and(|(f, v)| *f == r.food && *v == r.variant)
                    })
                    .map(|(j, _)| counts[j])
                    .sum();
                if counts[i] != demand {
                    counts[i] = demand;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        let mut slots = Vec::new();
        for (i, r) in self.recipes.iter().enumerate() {
            for k in 0..counts[i] {
                slots.push(InstanceSlot {
                    recipe: i,
                    instance: k as usize,
                    name: format!("{} {} {}", r.food, r.variant, k),
                });
            }
        }
        slots
    }

    /// Canonical textual form; `load(s.to_text())` yields a scenario equal to `s`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("[config]\n");
        out.push_str(&format!("setup_duration_min={}\n", self.setup_duration));
        out.push_str(&format!("seed={}\n", self.rng_seed));
        for r in &self.resources {
            out.push_str(&format!("\n[resource]\nzone={}\npot={}\n", r.zone, r.pot));
        }
        for g in &self.exclusion_groups {
            out.push_str(&format!("\n[exclusion]\nzones={}\n", g.zones.join(",")));
        }
        for r in &self.recipes {
            out.push_str(&format!("\n[recipe]\nname={}\n", r.name()));
            if let Some(p) = r.predecessor_name() {
                out.push_str(&format!("predecessor={p}\n"));
            }
            out.push_str(&format!("amount_g={}\n", r.amount_g));
            out.push_str(&format!("duration_min={}\n", r.duration_min));
            out.push_str(&format!("energy_kj={}\n", r.energy_kj));
            out.push_str(&format!("cost_eur={}\n", r.cost_eur));
            out.push_str(&format!("deficiency={}\n", r.deficiency));
            out.push_str(&format!("zones={}\n", r.zones.join(",")));
            out.push_str(&format!("pot={}\n", r.pot));
        }
        for l in &self.order {
            out.push_str(&format!(
                "\n[order]\nfood={}\namount_g={}\n",
                l.food, l.amount_g
            ));
        }
        for e in &self.overrides {
            out.push('\n');
            out.push_str("[override]\n");
            match e {
                ObservableEffect::ResourceUnavailable { zone } => {
                    out.push_str(&format!("unavailable={zone}\n"));
                }
                ObservableEffect::DurationOverride {
                    recipe,
                    zone,
                    pot,
                    start_min,
                    end_min,
                } => {
                    out.push_str(&format!(
                        "recipe={recipe}\nzone={zone}\npot={pot}\nstart_min={start_min}\nend_min={end_min}\n"
                    ));
                }
                ObservableEffect::QualityUpdate { recipe, deficiency } => {
                    out.push_str(&format!("recipe={recipe}\ndeficiency={deficiency}\n"));
                }
            }
        }
        out
    }

    /// Cross-reference validation; called by [`Scenario::load`] and available
    /// to code that builds scenarios programmatically.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let mut seen_resources = HashSet::new();
        for r in &self.resources {
            if r.zone.is_empty() || r.pot.is_empty() {
                return Err(ScenarioError::Invalid(
                    "resource with empty zone or pot name".into(),
                ));
            }
            if !seen_resources.insert((r.zone.clone(), r.pot.clone())) {
                return Err(ScenarioError::Invalid(format!(
                    "duplicate resource {}",
                    r.display_name()
                )));
            }
        }
        let zones: HashSet<&str> = self.resources.iter().map(|r| r.zone.as_str()).collect();

        for g in &self.exclusion_groups {
            if g.zones.len() < 2 {
                return Err(ScenarioError::Invalid(
                    "exclusion group needs at least 2 zones".into(),
                ));
            }
            let mut members = HashSet::new();
            for z in &g.zones {
                if !zones.contains(z.as_str()) {
                    return Err(ScenarioError::Invalid(format!(
                        "exclusion group references unknown zone {z}"
                    )));
                }
                if !members.insert(z.as_str()) {
                    return Err(ScenarioError::Invalid(format!(
                        "exclusion group lists zone {z} twice"
                    )));
                }
            }
        }

        let mut names = HashSet::new();
        for r in &self.recipes {
            if r.food.is_empty() || r.variant.is_empty() {
                return Err(ScenarioError::Invalid(
                    "recipe with empty food or variant name".into(),
                ));
            }
            if !names.insert((r.food.clone(), r.variant.clone())) {
                return Err(ScenarioError::Invalid(format!(
                    "duplicate recipe {}",
                    r.name()
                )));
            }
            if !r.amount_g.is_finite() || r.amount_g <= 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "recipe {}: amount_g must be > 0",
                    r.name()
                )));
            }
            if r.duration_min == 0 {
                return Err(ScenarioError::Invalid(format!(
                    "recipe {}: duration_min must be > 0",
                    r.name()
                )));
            }
            for (value, field) in [
                (r.energy_kj, "energy_kj"),
                (r.cost_eur, "cost_eur"),
                (r.deficiency, "deficiency"),
            ] {
                if !value.is_finite() || value < 0.0 {
                    return Err(ScenarioError::Invalid(format!(
                        "recipe {}: {field} must be a finite value >= 0",
                        r.name()
                    )));
                }
            }
            for z in &r.zones {
                if !zones.contains(z.as_str()) {
                    return Err(ScenarioError::UnknownZone {
                        recipe: r.name(),
                        zone: z.clone(),
                    });
                }
                if self.resource_index(z, &r.pot).is_none() {
                    return Err(ScenarioError::ZonePotMismatch {
                        recipe: r.name(),
                        zone: z.clone(),
                        pot: r.pot.clone(),
                    });
                }
            }
        }

        for r in &self.recipes {
            if let Some((f, v)) = &r.predecessor {
                if self.recipe_index(f, v).is_none() {
                    return Err(ScenarioError::UnknownPredecessor {
                        recipe: r.name(),
                        predecessor: format!("{f} {v}"),
                    });
                }
            }
        }
        self.check_predecessor_cycles()?;

        for l in &self.order {
            if !l.amount_g.is_finite() || l.amount_g < 0.0 {
                return Err(ScenarioError::Invalid(format!(
                    "order for {}: amount_g must be a finite value >= 0",
                    l.food
                )));
            }
        }

        for e in &self.overrides {
            match e {
                ObservableEffect::ResourceUnavailable { zone } => {
                    if !zones.contains(zone.as_str()) {
                        return Err(ScenarioError::Invalid(format!(
                            "override references unknown zone {zone}"
                        )));
                    }
                }
                ObservableEffect::DurationOverride {
                    recipe,
                    zone,
                    pot,
                    start_min,
                    end_min,
                } => {
                    if self.recipe_index_by_name(recipe).is_none() {
                        return Err(ScenarioError::Invalid(format!(
                            "override references unknown recipe {recipe}"
                        )));
                    }
                    if self.resource_index(zone, pot).is_none() {
                        return Err(ScenarioError::Invalid(format!(
                            "override references unknown resource {zone} {pot}"
                        )));
                    }
                    if end_min < start_min {
                        return Err(ScenarioError::Invalid(format!(
                            "override for {recipe}: end {end_min} before start {start_min}"
                        )));
                    }
                }
                ObservableEffect::QualityUpdate { recipe, deficiency } => {
                    if self.recipe_index_by_name(recipe).is_none() {
                        return Err(ScenarioError::Invalid(format!(
                            "override references unknown recipe {recipe}"
                        )));
                    }
                    if !deficiency.is_finite() || *deficiency < 0.0 {
                        return Err(ScenarioError::Invalid(format!(
                            "override for {recipe}: deficiency must be a finite value >= 0"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_predecessor_cycles(&self) -> Result<(), ScenarioError> {
        // 0 = unvisited, 1 = on stack, 2 = done
        let mut state = vec![0u8; self.recipes.len()];
        for start in 0..self.recipes.len() {
            let mut i = start;
            let mut path = Vec::new();
            while state[i] == 0 {
                state[i] = 1;
                path.push(i);
                match &self.recipes[i].predecessor {
                    Some((f, v)) => {
                        let j = self.recipe_index(f, v).expect("validated");
                        if state[j] == 1 {
                            return Err(ScenarioError::PredecessorCycle {
                                recipe: self.recipes[j].name(),
                            });
                        }
                        if state[j] == 2 {
                            break;
                        }
                        i = j;
                    }
                    None => break,
                }
            }
            for p in path {
                state[p] = 2;
            }
        }
        Ok(())
    }
}

/// Builds the standard four-zone hob.
///
/// Emits zones `<label>(1..7)`: zones 1-4 host Pot(1) independently, zone 5
/// combines the two upper zones for Pot(2), zone 6 combines the two lower
/// zones for Pot(2), zone 7 combines the three upper zones for Pot(3).
/// A combined zone excludes its constituents and overlapping combinations.
pub fn build_standard_hob(label: &str) -> (Vec<Resource>, Vec<ExclusionGroup>) {
    let zone = |i: usize| format!("{label}({i})");
    let resources = (1..=7)
        .map(|i| Resource {
            zone: zone(i),
            pot: match i {
                1..=4 => "Pot(1)".to_string(),
                5 | 6 => "Pot(2)".to_string(),
                _ => "Pot(3)".to_string(),
            },
        })
        .collect();
    let group = |ids: &[usize]| ExclusionGroup {
        zones: ids.iter().map(|&i| zone(i)).collect(),
    };
    let groups = vec![
        group(&[1, 2, 5]),
        group(&[3, 4, 6]),
        group(&[1, 2, 3, 7]),
        group(&[5, 7]),
    ];
    (resources, groups)
}

/// Fluent construction helper for tests and tools.
#[derive(Debug, Default, Clone)]
pub struct ScenarioBuilder {
    scenario: Scenario,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            recipes: Vec::new(),
            resources: Vec::new(),
            exclusion_groups: Vec::new(),
            order: Vec::new(),
            setup_duration: DEFAULT_SETUP_DURATION,
            overrides: Vec::new(),
            rng_seed: 0,
        }
    }
}

impl ScenarioBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn resource(mut self, zone: &str, pot: &str) -> Self {
        self.scenario.resources.push(Resource {
            zone: zone.into(),
            pot: pot.into(),
        });
        self
    }

    pub fn standard_hob(mut self, label: &str) -> Self {
        let (resources, groups) = build_standard_hob(label);
        self.scenario.resources.extend(resources);
        self.scenario.exclusion_groups.extend(groups);
        self
    }

    pub fn exclusion(mut self, zones: &[&str]) -> Self {
        self.scenario.exclusion_groups.push(ExclusionGroup {
            zones: zones.iter().map(|z| z.to_string()).collect(),
        });
        self
    }

    pub fn recipe(mut self, recipe: Recipe) -> Self {
        self.scenario.recipes.push(recipe);
        self
    }

    pub fn order(mut self, food: &str, amount_g: f64) -> Self {
        self.scenario.order.push(OrderLine {
            food: food.into(),
            amount_g,
        });
        self
    }

    pub fn setup_duration(mut self, minutes: Minutes) -> Self {
        self.scenario.setup_duration = minutes;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.scenario.rng_seed = seed;
        self
    }

    pub fn effect(mut self, effect: ObservableEffect) -> Self {
        self.scenario.overrides.push(effect);
        self
    }

    pub fn build(self) -> Result<Scenario, ScenarioError> {
        self.scenario.validate()?;
        Ok(self.scenario)
    }
}
