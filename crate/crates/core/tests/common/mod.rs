//! Shared fixtures for integration tests.
#![allow(dead_code)] // each test binary uses a subset

use kitchenforge_core::scenario::{Recipe, ScenarioBuilder};
use kitchenforge_core::Scenario;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const ONE_HOB: &str = include_str!("../../../../scenarios/one_hob.scenario");
pub const FOUR_HOBS: &str = include_str!("../../../../scenarios/four_hobs.scenario");

pub fn one_hob() -> Scenario {
    Scenario::load(ONE_HOB).expect("bundled scenario must load")
}

pub fn four_hobs() -> Scenario {
    Scenario::load(FOUR_HOBS).expect("bundled scenario must load")
}

/// A randomized tiny instance: at most 3 slots on at most 3 zones, sometimes
/// with an exclusion group and sometimes with a predecessor chain. Numeric
/// parameters are integers so objective sums are exact.
pub fn tiny_scenario(rng: &mut ChaCha8Rng) -> Scenario {
    let zone_count = rng.random_range(1..=3usize);
    let zones: Vec<String> = (1..=zone_count).map(|i| format!("Z({i})")).collect();
    let mut builder = ScenarioBuilder::new();
    for z in &zones {
        builder = builder.resource(z, "Pot(1)");
    }
    if zone_count >= 2 && rng.random_bool(0.5) {
        builder = builder.exclusion(&[zones[0].as_str(), zones[1].as_str()]);
    }

    let slot_budget = rng.random_range(1..=3usize);
    let recipe_count = rng.random_range(1..=slot_budget);
    let mut slots_left = slot_budget;
    let mut recipes: Vec<(String, usize)> = Vec::new();
    for r in 0..recipe_count {
        let remaining_recipes = recipe_count - r - 1;
        let max_here = slots_left - remaining_recipes;
        let executions = if r + 1 == recipe_count {
            max_here
        } else {
            rng.random_range(1..=max_here)
        };
        slots_left -= executions;
        recipes.push((format!("Food{r}"), executions));
    }

    let with_predecessor = recipes.len() >= 2 && rng.random_bool(0.4);
    for (r, (food, executions)) in recipes.iter().enumerate() {
        let mut compatible: Vec<&str> = zones
            .iter()
            .map(String::as_str)
            .filter(|_| rng.random_bool(0.7))
            .collect();
        if compatible.is_empty() {
            compatible.push(zones[rng.random_range(0..zones.len())].as_str());
        }
        let recipe = Recipe {
            food: food.clone(),
            variant: "A".into(),
            predecessor: (with_predecessor && r == 1)
                .then(|| (recipes[0].0.clone(), "A".into())),
            amount_g: 100.0,
            zones: compatible.iter().map(|z| z.to_string()).collect(),
            pot: "Pot(1)".into(),
            energy_kj: rng.random_range(1..=20u32) as f64 * 50.0,
            duration_min: rng.random_range(5..=30u64),
            cost_eur: 0.01,
            deficiency: rng.random_range(1..=20u32) as f64,
        };
        builder = builder.recipe(recipe);
        builder = builder.order(food, *executions as f64 * 100.0);
    }
    builder.build().expect("generated scenario is valid")
}
