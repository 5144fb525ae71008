//! The kitchen digital twin.
//!
//! [`KitchenTwin`] compiles a scenario into lookup tables, decodes a
//! chromosome into a feasible timed schedule by priority-driven list
//! scheduling, and evaluates the objective vector. Decoding and evaluation
//! are pure: the optimizer may call them from many workers concurrently on a
//! shared twin.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand::Rng;

use crate::metrics::ObservableEffect;
use crate::scenario::{InstanceSlot, Scenario, NO_ALLOCATION};
use crate::Minutes;

/// One decision pair: which resource executes a slot (an index into the
/// slot's allocation domain, the domain length meaning "No allocation") and
/// the slot's scheduling priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gene {
    pub allocation: u32,
    pub priority: u32,
}

/// Fixed-length decision vector, one gene per instance slot.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Chromosome {
    pub genes: Vec<Gene>,
}

impl Chromosome {
    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    /// The cooking task itself.
    Main { slot: usize },
    /// Pre-cooking preparation, scheduled before the main task of slots whose
    /// recipe has a predecessor.
    Subtask { slot: usize },
    /// Changeover between different productions on one resource; `from` and
    /// `to` are recipe indices.
    Setup { from: usize, to: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Task {
    pub kind: TaskKind,
    pub resource: usize,
    pub start: Minutes,
    pub end: Minutes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ScheduleStatus {
    Succeeded,
    Infeasible { reason: String },
}

/// Per-resource ordered task intervals plus the decode status.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Schedule {
    /// Indexed like `Scenario::resources`; tasks sorted by start time.
    pub tasks: Vec<Vec<Task>>,
    pub status: ScheduleStatus,
}

impl Schedule {
    pub fn makespan(&self) -> Minutes {
        self.tasks
            .iter()
            .flatten()
            .map(|t| t.end)
            .max()
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.iter().all(|t| t.is_empty())
    }

    pub fn iter_tasks(&self) -> impl Iterator<Item = &Task> {
        self.tasks.iter().flatten()
    }
}

/// Evaluated objectives. Monetary cost is carried for reporting but not
/// optimized; `coverage_shortfall_g` is the feasibility annotation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveVector {
    pub makespan_min: Minutes,
    pub energy_kj: f64,
    pub deficiency: f64,
    pub cost_eur: f64,
    pub coverage_shortfall_g: f64,
}

impl ObjectiveVector {
    pub const ZERO: ObjectiveVector = ObjectiveVector {
        makespan_min: 0,
        energy_kj: 0.0,
        deficiency: 0.0,
        cost_eur: 0.0,
        coverage_shortfall_g: 0.0,
    };

    pub fn feasible(&self) -> bool {
        self.coverage_shortfall_g == 0.0
    }

    /// The optimized components: makespan, energy, deficiency.
    pub fn optimized(&self) -> [f64; 3] {
        [self.makespan_min as f64, self.energy_kj, self.deficiency]
    }

    /// Constrained domination: a covering solution dominates any solution
    /// with coverage shortfall; among shortfall solutions the smaller
    /// shortfall wins; ties fall back to objective domination.
    pub fn dominates(&self, other: &ObjectiveVector) -> bool {
        match (self.feasible(), other.feasible()) {
            (true, false) => return true,
            (false, true) => return false,
            (false, false) if self.coverage_shortfall_g != other.coverage_shortfall_g => {
                return self.coverage_shortfall_g < other.coverage_shortfall_g;
            }
            _ => {}
        }
        let a = self.optimized();
        let b = other.optimized();
        a.iter().zip(&b).all(|(x, y)| x <= y) && a.iter().zip(&b).any(|(x, y)| x < y)
    }

    /// Domination or equality on (shortfall, makespan, energy, deficiency).
    pub fn covers(&self, other: &ObjectiveVector) -> bool {
        self.dominates(other)
            || (self.coverage_shortfall_g == other.coverage_shortfall_g
                && self.optimized() == other.optimized())
    }
}

/// Preparation time scheduled before a main task: 10% of the main duration,
/// rounded down, at least one minute.
pub fn subtask_duration(main_duration: Minutes) -> Minutes {
    debug_assert!(main_duration > 0);
    (main_duration / 10).max(1)
}

/// Per-objective normalization range derived from the scenario extremes:
/// the all-unallocated chromosome (lower) and fully serial execution of every
/// slot at its slowest resource (upper).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveBounds {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl ObjectiveBounds {
    /// Component-wise (x - lo) / (hi - lo), clamped to [0, 1]; a degenerate
    /// range maps to 0.
    pub fn normalize(&self, v: &ObjectiveVector) -> [f64; 3] {
        let raw = v.optimized();
        let mut out = [0.0; 3];
        for i in 0..3 {
            let span = self.hi[i] - self.lo[i];
            out[i] = if span > 0.0 {
                ((raw[i] - self.lo[i]) / span).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }
}

/// The compiled digital twin of one scenario.
#[derive(Debug, Clone)]
pub struct KitchenTwin {
    scenario: Scenario,
    slots: Vec<InstanceSlot>,
    /// Per slot: allocatable resource indices, catalog order.
    domains: Vec<Vec<usize>>,
    /// Per slot and domain choice: effective main-task duration.
    durations: Vec<Vec<Minutes>>,
    /// Per recipe: deficiency after quality updates.
    recipe_deficiency: Vec<f64>,
    /// Per recipe: predecessor recipe index.
    predecessor: Vec<Option<usize>>,
    food_of_recipe: Vec<usize>,
    foods: Vec<String>,
    ordered_g: Vec<f64>,
    zone_of_resource: Vec<usize>,
    /// Per zone: zones that may not overlap with it (its exclusion-group
    /// peers, itself included).
    coupled_zones: Vec<Vec<usize>>,
}

impl KitchenTwin {
    pub fn new(scenario: &Scenario) -> KitchenTwin {
        let slots = scenario.expand_instances();
        let foods: Vec<String> = scenario
            .food_types()
            .into_iter()
            .map(str::to_string)
            .collect();
        let food_index: HashMap<&str, usize> = foods
            .iter()
            .enumerate()
            .map(|(i, f)| (f.as_str(), i))
            .collect();
        let food_of_recipe: Vec<usize> = scenario
            .recipes
            .iter()
            .map(|r| food_index[r.food.as_str()])
            .collect();
        let ordered_g: Vec<f64> = foods.iter().map(|f| scenario.ordered_amount(f)).collect();
        let predecessor: Vec<Option<usize>> = scenario
            .recipes
            .iter()
            .map(|r| {
                r.predecessor
                    .as_ref()
                    .map(|(f, v)| scenario.recipe_index(f, v).expect("validated scenario"))
            })
            .collect();

        let mut recipe_deficiency: Vec<f64> =
            scenario.recipes.iter().map(|r| r.deficiency).collect();
        let mut duration_override: HashMap<(usize, usize), Minutes> = HashMap::new();
        for effect in &scenario.overrides {
            match effect {
                ObservableEffect::DurationOverride {
                    recipe,
                    zone,
                    pot,
                    start_min,
                    end_min,
                } => {
                    if let (Some(ri), Some(res)) = (
                        scenario.recipe_index_by_name(recipe),
                        scenario.resource_index(zone, pot),
                    ) {
                        duration_override.insert((ri, res), end_min.saturating_sub(*start_min));
                    }
                }
                ObservableEffect::QualityUpdate { recipe, deficiency } => {
                    if let Some(ri) = scenario.recipe_index_by_name(recipe) {
                        recipe_deficiency[ri] = *deficiency;
                    }
                }
                ObservableEffect::ResourceUnavailable { .. } => {}
            }
        }

        let domains: Vec<Vec<usize>> = slots
            .iter()
            .map(|s| scenario.compatible_resources(s.recipe))
            .collect();
        let durations: Vec<Vec<Minutes>> = slots
            .iter()
            .zip(&domains)
            .map(|(s, domain)| {
                domain
                    .iter()
                    .map(|&res| {
                        duration_override
                            .get(&(s.recipe, res))
                            .copied()
                            .unwrap_or(scenario.recipes[s.recipe].duration_min)
                            .max(1)
                    })
                    .collect()
            })
            .collect();

        let mut zone_ids: Vec<String> = Vec::new();
        let mut zone_of_resource = Vec::with_capacity(scenario.resources.len());
        for r in &scenario.resources {
            let id = match zone_ids.iter().position(|z| *z == r.zone) {
                Some(i) => i,
                None => {
                    zone_ids.push(r.zone.clone());
                    zone_ids.len() - 1
                }
            };
            zone_of_resource.push(id);
        }
        let mut coupled_zones: Vec<Vec<usize>> = (0..zone_ids.len()).map(|z| vec![z]).collect();
        for group in &scenario.exclusion_groups {
            let members: Vec<usize> = group
                .zones
                .iter()
                .filter_map(|z| zone_ids.iter().position(|id| id == z))
                .collect();
            for &z in &members {
                for &peer in &members {
                    if !coupled_zones[z].contains(&peer) {
                        coupled_zones[z].push(peer);
                    }
                }
            }
        }

        KitchenTwin {
            scenario: scenario.clone(),
            slots,
            domains,
            durations,
            recipe_deficiency,
            predecessor,
            food_of_recipe,
            foods,
            ordered_g,
            zone_of_resource,
            coupled_zones,
        }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn slots(&self) -> &[InstanceSlot] {
        &self.slots
    }

    pub fn slot_count(&self) -> usize {
        self.slots.len()
    }

    pub fn domain(&self, slot: usize) -> &[usize] {
        &self.domains[slot]
    }

    /// Allocation gene value meaning "No allocation" for this slot.
    pub fn no_allocation_gene(&self, slot: usize) -> u32 {
        self.domains[slot].len() as u32
    }

    /// Resource index a gene allocates, or None for "No allocation".
    pub fn allocated_resource(&self, slot: usize, gene: Gene) -> Option<usize> {
        self.domains[slot].get(gene.allocation as usize).copied()
    }

    /// Protocol-facing allocation value for a gene.
    pub fn allocation_display(&self, slot: usize, gene: Gene) -> String {
        match self.allocated_resource(slot, gene) {
            Some(r) => self.scenario.resources[r].display_name(),
            None => NO_ALLOCATION.to_string(),
        }
    }

    /// Effective main duration of a slot on a domain choice.
    pub fn choice_duration(&self, slot: usize, choice: usize) -> Minutes {
        self.durations[slot][choice]
    }

    pub fn recipe_deficiency(&self, recipe: usize) -> f64 {
        self.recipe_deficiency[recipe]
    }

    pub fn random_chromosome(&self, rng: &mut impl Rng) -> Chromosome {
        let l = self.slots.len().max(1) as u32;
        Chromosome {
            genes: (0..self.slots.len())
                .map(|i| Gene {
                    allocation: rng.random_range(0..=self.domains[i].len()) as u32,
                    priority: rng.random_range(0..l),
                })
                .collect(),
        }
    }

    fn assert_valid(&self, chromosome: &Chromosome) {
        assert_eq!(
            chromosome.genes.len(),
            self.slots.len(),
            "chromosome length must equal the slot count"
        );
        for (i, gene) in chromosome.genes.iter().enumerate() {
            assert!(
                gene.allocation as usize <= self.domains[i].len(),
                "slot {i}: allocation {} outside domain of size {}",
                gene.allocation,
                self.domains[i].len() + 1
            );
        }
    }

    /// Earliest time every zone coupled with `zone` is free.
    fn group_free(&self, zone: usize, zone_busy: &[Minutes]) -> Minutes {
        self.coupled_zones[zone]
            .iter()
            .map(|&z| zone_busy[z])
            .max()
            .unwrap_or(0)
    }

    /// Deterministic priority-driven list scheduling.
    ///
    /// Repeatedly picks the highest-priority allocated slot whose predecessor
    /// constraint is satisfied (ties to the lower slot index) and places its
    /// setup, subtask and main task on the allocated resource at the earliest
    /// time that respects the resource, its exclusion groups and predecessor
    /// completion. Never panics on a valid chromosome.
    pub fn decode(&self, chromosome: &Chromosome) -> Schedule {
        self.assert_valid(chromosome);
        let n_recipes = self.scenario.recipes.len();
        let mut tasks: Vec<Vec<Task>> = vec![Vec::new(); self.scenario.resources.len()];
        let mut resource_free: Vec<Minutes> = vec![0; self.scenario.resources.len()];
        let mut zone_busy: Vec<Minutes> = vec![0; self.coupled_zones.len()];
        let mut last_main: Vec<Option<usize>> = vec![None; self.scenario.resources.len()];
        let mut first_completion: Vec<Option<Minutes>> = vec![None; n_recipes];
        let mut waiting: Vec<Vec<usize>> = vec![Vec::new(); n_recipes];
        let mut ready: BinaryHeap<(u32, Reverse<usize>)> = BinaryHeap::new();
        let mut unscheduled = 0usize;

        for (i, gene) in chromosome.genes.iter().enumerate() {
            if self.allocated_resource(i, *gene).is_none() {
                continue;
            }
            unscheduled += 1;
            match self.predecessor[self.slots[i].recipe] {
                None => ready.push((gene.priority, Reverse(i))),
                Some(p) => waiting[p].push(i),
            }
        }

        while let Some((_, Reverse(slot))) = ready.pop() {
            let gene = chromosome.genes[slot];
            let choice = gene.allocation as usize;
            let resource = self.domains[slot][choice];
            let zone = self.zone_of_resource[resource];
            let recipe = self.slots[slot].recipe;
            let duration = self.durations[slot][choice];

            if let Some(previous) = last_main[resource] {
                if previous != recipe {
                    let start = resource_free[resource].max(self.group_free(zone, &zone_busy));
                    let end = start + self.scenario.setup_duration;
                    tasks[resource].push(Task {
                        kind: TaskKind::Setup {
                            from: previous,
                            to: recipe,
                        },
                        resource,
                        start,
                        end,
                    });
                    resource_free[resource] = end;
                    zone_busy[zone] = zone_busy[zone].max(end);
                }
            }

            if self.predecessor[recipe].is_some() {
                let start = resource_free[resource].max(self.group_free(zone, &zone_busy));
                let end = start + subtask_duration(duration);
                tasks[resource].push(Task {
                    kind: TaskKind::Subtask { slot },
                    resource,
                    start,
                    end,
                });
                resource_free[resource] = end;
                zone_busy[zone] = zone_busy[zone].max(end);
            }

            let predecessor_done = match self.predecessor[recipe] {
                Some(p) => first_completion[p].expect("ready slot has a placed predecessor main"),
                None => 0,
            };
            let start = resource_free[resource]
                .max(self.group_free(zone, &zone_busy))
                .max(predecessor_done);
            let end = start + duration;
            tasks[resource].push(Task {
                kind: TaskKind::Main { slot },
                resource,
                start,
                end,
            });
            resource_free[resource] = end;
            zone_busy[zone] = zone_busy[zone].max(end);
            last_main[resource] = Some(recipe);
            unscheduled -= 1;

            let newly_completed = first_completion[recipe].is_none();
            first_completion[recipe] = Some(first_completion[recipe].map_or(end, |e| e.min(end)));
            if newly_completed {
                for w in waiting[recipe].drain(..) {
                    ready.push((chromosome.genes[w].priority, Reverse(w)));
                }
            }
        }

        let status = if unscheduled == 0 {
            ScheduleStatus::Succeeded
        } else {
            let mut stuck: Vec<&str> = waiting
                .iter()
                .flatten()
                .map(|&i| self.slots[i].name.as_str())
                .collect();
            stuck.sort_unstable();
            let preview = stuck
                .iter()
                .take(4)
                .copied()
                .collect::<Vec<_>>()
                .join(", ");
            ScheduleStatus::Infeasible {
                reason: format!("circular or unallocated predecessor for {preview}"),
            }
        };
        Schedule { tasks, status }
    }

    /// Aggregates objectives over the executed main tasks. Sums accumulate in
    /// slot order so equal execution multisets give bit-identical totals.
    pub fn evaluate(&self, schedule: &Schedule) -> ObjectiveVector {
        let mut executed = vec![false; self.slots.len()];
        let mut makespan = 0;
        for task in schedule.iter_tasks() {
            makespan = makespan.max(task.end);
            if let TaskKind::Main { slot } = task.kind {
                executed[slot] = true;
            }
        }
        let mut energy = 0.0;
        let mut deficiency = 0.0;
        let mut cost = 0.0;
        let mut produced = vec![0.0f64; self.foods.len()];
        for (i, done) in executed.iter().enumerate() {
            if !done {
                continue;
            }
            let recipe = self.slots[i].recipe;
            let r = &self.scenario.recipes[recipe];
            energy += r.energy_kj;
            deficiency += self.recipe_deficiency[recipe];
            cost += r.cost_eur;
            produced[self.food_of_recipe[recipe]] += r.amount_g;
        }
        let shortfall = self
            .ordered_g
            .iter()
            .zip(&produced)
            .map(|(ordered, got)| (ordered - got).max(0.0))
            .sum();
        ObjectiveVector {
            makespan_min: makespan,
            energy_kj: energy,
            deficiency,
            cost_eur: cost,
            coverage_shortfall_g: shortfall,
        }
    }

    /// Coverage repair: while any ordered food falls short of its ordered
    /// amount, a uniformly random unallocated gene of a shortfall-reducing
    /// recipe is flipped to a random real allocation. Allocated slots whose
    /// predecessor recipe has no allocated slot then get one, so the repaired
    /// chromosome decodes to a covering schedule whenever the slot bounds
    /// permit. Chromosomes that already cover are returned unchanged.
    pub fn repair(&self, chromosome: &Chromosome, rng: &mut impl Rng) -> Chromosome {
        let mut out = chromosome.clone();
        if self.slots.is_empty() {
            return out;
        }
        let mut produced = vec![0.0f64; self.foods.len()];
        let mut allocated_per_recipe = vec![0usize; self.scenario.recipes.len()];
        let mut spare: Vec<Vec<usize>> = vec![Vec::new(); self.foods.len()];
        for (i, gene) in out.genes.iter().enumerate() {
            let recipe = self.slots[i].recipe;
            let food = self.food_of_recipe[recipe];
            if self.allocated_resource(i, *gene).is_some() {
                produced[food] += self.scenario.recipes[recipe].amount_g;
                allocated_per_recipe[recipe] += 1;
            } else if !self.domains[i].is_empty() {
                spare[food].push(i);
            }
        }

        loop {
            let lacking: Vec<usize> = (0..self.foods.len())
                .filter(|&f| produced[f] < self.ordered_g[f] && !spare[f].is_empty())
                .collect();
            if lacking.is_empty() {
                break;
            }
            let total: usize = lacking.iter().map(|&f| spare[f].len()).sum();
            let mut pick = rng.random_range(0..total);
            for &food in &lacking {
                if pick >= spare[food].len() {
                    pick -= spare[food].len();
                    continue;
                }
                let slot = spare[food].swap_remove(pick);
                let recipe = self.slots[slot].recipe;
                out.genes[slot].allocation =
                    rng.random_range(0..self.domains[slot].len()) as u32;
                produced[food] += self.scenario.recipes[recipe].amount_g;
                allocated_per_recipe[recipe] += 1;
                break;
            }
        }

        // Ensure every allocated successor has an allocated predecessor.
        let mut work: Vec<usize> = (0..self.scenario.recipes.len())
            .filter(|&r| allocated_per_recipe[r] > 0)
            .collect();
        while let Some(recipe) = work.pop() {
            let Some(pred) = self.predecessor[recipe] else {
                continue;
            };
            if allocated_per_recipe[pred] > 0 {
                continue;
            }
            let candidates: Vec<usize> = (0..self.slots.len())
                .filter(|&i| {
                    self.slots[i].recipe == pred
                        && !self.domains[i].is_empty()
                        && self.allocated_resource(i, out.genes[i]).is_none()
                })
                .collect();
            if candidates.is_empty() {
                continue;
            }
            let slot = candidates[rng.random_range(0..candidates.len())];
            out.genes[slot].allocation = rng.random_range(0..self.domains[slot].len()) as u32;
            allocated_per_recipe[pred] += 1;
            let food = self.food_of_recipe[pred];
            produced[food] += self.scenario.recipes[pred].amount_g;
            spare[food].retain(|&s| s != slot);
            work.push(pred);
        }
        out
    }

    /// Normalization range for the optimized objectives.
    pub fn objective_bounds(&self) -> ObjectiveBounds {
        let mut hi = [0.0f64; 3];
        for (i, slot) in self.slots.iter().enumerate() {
            let recipe = slot.recipe;
            let worst = self.durations[i]
                .iter()
                .copied()
                .max()
                .unwrap_or(self.scenario.recipes[recipe].duration_min);
            let mut span = worst + self.scenario.setup_duration;
            if self.predecessor[recipe].is_some() {
                span += subtask_duration(worst);
            }
            hi[0] += span as f64;
            hi[1] += self.scenario.recipes[recipe].energy_kj;
            hi[2] += self.recipe_deficiency[recipe];
        }
        ObjectiveBounds { lo: [0.0; 3], hi }
    }
}

#[cfg(test)]
mod tests;
