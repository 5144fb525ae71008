//! Exhaustive Pareto enumeration for tiny instances.
//!
//! Decodes every combination of allocation choices and scheduling orders
//! with the same [`KitchenTwin`] the optimizer uses, so equivalence tests
//! exercise the search, not the model. Intended for instances of a few slots;
//! the budget guard rejects anything larger.

use itertools::Itertools;
use thiserror::Error;

use crate::scenario::Scenario;
use crate::twin::{Chromosome, Gene, KitchenTwin, ObjectiveVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EnumerationBudget {
    pub max_combinations: u64,
}

impl Default for EnumerationBudget {
    fn default() -> Self {
        EnumerationBudget {
            max_combinations: 1_000_000,
        }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("enumeration needs {combinations} combinations, budget is {budget}")]
    BudgetExceeded { combinations: u128, budget: u64 },
}

/// Enumerates every (allocation assignment, scheduling order) combination and
/// returns the non-dominated feasible objective vectors in canonical order.
pub fn enumerate_pareto(
    scenario: &Scenario,
    budget: EnumerationBudget,
) -> Result<Vec<ObjectiveVector>, OracleError> {
    let twin = KitchenTwin::new(scenario);
    enumerate_with_twin(&twin, budget)
}

/// Same as [`enumerate_pareto`] over an existing twin.
pub fn enumerate_with_twin(
    twin: &KitchenTwin,
    budget: EnumerationBudget,
) -> Result<Vec<ObjectiveVector>, OracleError> {
    let n = twin.slot_count();
    let radices: Vec<usize> = (0..n).map(|i| twin.domain(i).len() + 1).collect();

    let mut assignments: u128 = 1;
    for &r in &radices {
        assignments = assignments.saturating_mul(r as u128);
        if assignments > budget.max_combinations as u128 {
            return Err(OracleError::BudgetExceeded {
                combinations: assignments,
                budget: budget.max_combinations,
            });
        }
    }
    // Scheduling orders multiply each assignment by (allocated)!.
    let mut total: u128 = 0;
    let mut digits = vec![0usize; n];
    loop {
        let allocated = digits
            .iter()
            .enumerate()
            .filter(|(i, &d)| d < twin.domain(*i).len())
            .count();
        total = total.saturating_add(factorial(allocated));
        if total > budget.max_combinations as u128 {
            return Err(OracleError::BudgetExceeded {
                combinations: total,
                budget: budget.max_combinations,
            });
        }
        if !advance(&mut digits, &radices) {
            break;
        }
    }

    let mut vectors: Vec<ObjectiveVector> = Vec::new();
    let mut digits = vec![0usize; n];
    loop {
        let allocated: Vec<usize> = digits
            .iter()
            .enumerate()
            .filter(|(i, &d)| d < twin.domain(*i).len())
            .map(|(i, _)| i)
            .collect();
        let genes: Vec<Gene> = digits
            .iter()
            .map(|&d| Gene {
                allocation: d as u32,
                priority: 0,
            })
            .collect();
        for order in allocated.iter().permutations(allocated.len()) {
            let mut chromosome = Chromosome {
                genes: genes.clone(),
            };
            // Earlier in the order means higher priority.
            for (rank, &&slot) in order.iter().enumerate() {
                chromosome.genes[slot].priority = (n - 1 - rank) as u32;
            }
            let objectives = twin.evaluate(&twin.decode(&chromosome));
            if objectives.feasible() {
                vectors.push(objectives);
            }
        }
        if !advance(&mut digits, &radices) {
            break;
        }
    }

    vectors.sort_by(canonical_order);
    vectors.dedup();
    let front: Vec<ObjectiveVector> = vectors
        .iter()
        .filter(|v| !vectors.iter().any(|u| u.dominates(v)))
        .copied()
        .collect();
    Ok(front)
}

/// Canonical comparison on (makespan, energy, deficiency, cost).
pub fn canonical_order(a: &ObjectiveVector, b: &ObjectiveVector) -> std::cmp::Ordering {
    a.makespan_min
        .cmp(&b.makespan_min)
        .then(a.energy_kj.total_cmp(&b.energy_kj))
        .then(a.deficiency.total_cmp(&b.deficiency))
        .then(a.cost_eur.total_cmp(&b.cost_eur))
}

fn advance(digits: &mut [usize], radices: &[usize]) -> bool {
    for i in 0..digits.len() {
        digits[i] += 1;
        if digits[i] < radices[i] {
            return true;
        }
        digits[i] = 0;
    }
    false
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).product()
}
