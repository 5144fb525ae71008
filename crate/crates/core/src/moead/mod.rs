//! Decomposition-based multi-objective optimizer over chromosomes.
//!
//! The engine scalarizes the three optimized objectives with Tchebycheff
//! weights laid out on a simplex lattice, keeps one incumbent per weight
//! vector, breeds offspring from weight-space neighborhoods and maintains an
//! external non-dominated archive. Offspring evaluation may run on several
//! workers; neighbor updates and archive inserts are serialized per
//! generation in subproblem-index order, so results are independent of the
//! worker count.

mod archive;

pub use archive::{ArchiveEntry, ParetoArchive};

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::scenario::Scenario;
use crate::twin::{Chromosome, KitchenTwin, ObjectiveBounds, ObjectiveVector};

/// Standard diversity guard: one offspring replaces at most this many
/// neighbors.
const MAX_REPLACEMENTS: usize = 2;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MoeadParams {
    /// Simplex lattice granularity H; the population holds C(H+2, 2) weight
    /// vectors.
    pub weight_granularity: u32,
    /// Neighborhood size T (nearest weight vectors, self included).
    pub neighborhood: usize,
    pub generations: u32,
    /// Per-gene mutation probability; defaults to 1/L for L slots.
    pub mutation_rate: Option<f64>,
    pub seed: u64,
}

impl Default for MoeadParams {
    fn default() -> Self {
        MoeadParams {
            weight_granularity: 12,
            neighborhood: 10,
            generations: 200,
            mutation_rate: None,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunStats {
    pub evaluations: u64,
    pub generations: u32,
    pub wall: Duration,
}

/// Everything a caller needs from one optimization run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub archive: ParetoArchive,
    /// Component-wise minimum of all normalized objective vectors seen.
    pub ideal: [f64; 3],
    pub bounds: ObjectiveBounds,
    pub stats: RunStats,
}

impl RunOutcome {
    /// Archive member closest (Euclidean, normalized) to the ideal point;
    /// ties resolve in canonical archive order.
    pub fn knee_point(&self) -> Option<&ArchiveEntry> {
        let mut best: Option<(f64, &ArchiveEntry)> = None;
        for entry in self.archive.sorted() {
            let n = self.bounds.normalize(&entry.objectives);
            let dist = (0..3)
                .map(|i| (n[i] - self.ideal[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            if best.is_none_or(|(d, _)| dist < d) {
                best = Some((dist, entry));
            }
        }
        best.map(|(_, e)| e)
    }
}

/// Weight vectors on the simplex lattice {(i, j, k) / H : i + j + k = H}.
pub fn weight_lattice(granularity: u32) -> Vec<[f64; 3]> {
    let h = granularity;
    let mut out = Vec::new();
    for i in 0..=h {
        for j in 0..=(h - i) {
            let k = h - i - j;
            out.push([f64::from(i) / f64::from(h), f64::from(j) / f64::from(h), f64::from(k) / f64::from(h)]);
        }
    }
    out
}

/// For each weight vector, the indices of its `t` nearest weights by
/// Euclidean distance, self included, ties broken by index.
pub fn nearest_neighbors(weights: &[[f64; 3]], t: usize) -> Vec<Vec<usize>> {
    weights
        .iter()
        .map(|w| {
            let mut by_distance: Vec<(f64, usize)> = weights
                .iter()
                .enumerate()
                .map(|(j, u)| {
                    let d = (0..3).map(|k| (w[k] - u[k]).powi(2)).sum::<f64>();
                    (d, j)
                })
                .collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            by_distance.into_iter().take(t).map(|(_, j)| j).collect()
        })
        .collect()
}

/// Tchebycheff scalarization max_i w_i |f_i - z_i|. Zero weights are lifted
/// to 1e-6 so every subproblem optimum stays Pareto-optimal.
pub fn tchebycheff(point: [f64; 3], weight: [f64; 3], ideal: [f64; 3]) -> f64 {
    const MIN_WEIGHT: f64 = 1e-6;
    (0..3)
        .map(|i| weight[i].max(MIN_WEIGHT) * (point[i] - ideal[i]).abs())
        .fold(0.0, f64::max)
}

/// Uniform crossover at gene-pair granularity: a slot's allocation and
/// priority travel together, chosen from either parent by coin flip.
pub fn crossover(a: &Chromosome, b: &Chromosome, rng: &mut impl Rng) -> Chromosome {
    assert_eq!(
        a.genes.len(),
        b.genes.len(),
        "crossover parents must have equal length"
    );
    Chromosome {
        genes: a
            .genes
            .iter()
            .zip(&b.genes)
            .map(|(x, y)| if rng.random_bool(0.5) { *x } else { *y })
            .collect(),
    }
}

/// Per gene pair, with probability `rate`: resample either the allocation
/// (uniform over the domain including "No allocation") or the priority,
/// 50/50 which half.
pub fn mutate(twin: &KitchenTwin, c: &Chromosome, rate: f64, rng: &mut impl Rng) -> Chromosome {
    assert!((0.0..=1.0).contains(&rate), "mutation rate must be in [0, 1]");
    let l = c.genes.len().max(1) as u32;
    Chromosome {
        genes: c
            .genes
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let mut gene = *g;
                if rng.random_bool(rate) {
                    if rng.random_bool(0.5) {
                        gene.allocation = rng.random_range(0..=twin.domain(i).len()) as u32;
                    } else {
                        gene.priority = rng.random_range(0..l);
                    }
                }
                gene
            })
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub struct Incumbent {
    pub chromosome: Chromosome,
    pub objectives: ObjectiveVector,
    pub normalized: [f64; 3],
}

/// The optimizer state. [`run`] drives it end to end; tests step it with
/// [`Moead::evolve`].
pub struct Moead {
    twin: KitchenTwin,
    bounds: ObjectiveBounds,
    weights: Vec<[f64; 3]>,
    neighbors: Vec<Vec<usize>>,
    incumbents: Vec<Incumbent>,
    ideal: [f64; 3],
    archive: ParetoArchive,
    rng: ChaCha8Rng,
    mutation_rate: f64,
    evaluations: u64,
    generation: u32,
}

impl Moead {
    pub fn new(scenario: &Scenario, params: &MoeadParams) -> Result<Moead, EngineError> {
        if params.weight_granularity < 1 {
            return Err(EngineError::InvalidParams(
                "weight granularity must be >= 1".into(),
            ));
        }
        let weights = weight_lattice(params.weight_granularity);
        if params.neighborhood == 0 || params.neighborhood > weights.len() {
            return Err(EngineError::InvalidParams(format!(
                "neighborhood {} must be in 1..={}",
                params.neighborhood,
                weights.len()
            )));
        }
        if let Some(rate) = params.mutation_rate {
            if !(0.0..=1.0).contains(&rate) {
                return Err(EngineError::InvalidParams(format!(
                    "mutation rate {rate} must be in [0, 1]"
                )));
            }
        }
        let twin = KitchenTwin::new(scenario);
        let bounds = twin.objective_bounds();
        let neighbors = nearest_neighbors(&weights, params.neighborhood);
        let mutation_rate = params
            .mutation_rate
            .unwrap_or_else(|| match twin.slot_count() {
                0 => 0.0,
                l => 1.0 / l as f64,
            });
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

        let population: Vec<Chromosome> = (0..weights.len())
            .map(|_| {
                let c = twin.random_chromosome(&mut rng);
                twin.repair(&c, &mut rng)
            })
            .collect();
        let evaluated: Vec<ObjectiveVector> = population
            .par_iter()
            .map(|c| twin.evaluate(&twin.decode(c)))
            .collect();

        let mut ideal = [f64::INFINITY; 3];
        let mut archive = ParetoArchive::new();
        let mut incumbents = Vec::with_capacity(population.len());
        for (chromosome, objectives) in population.into_iter().zip(evaluated) {
            let normalized = bounds.normalize(&objectives);
            for k in 0..3 {
                ideal[k] = ideal[k].min(normalized[k]);
            }
            archive.insert(chromosome.clone(), objectives);
            incumbents.push(Incumbent {
                chromosome,
                objectives,
                normalized,
            });
        }
        let evaluations = incumbents.len() as u64;
        Ok(Moead {
            twin,
            bounds,
            weights,
            neighbors,
            incumbents,
            ideal,
            archive,
            rng,
            mutation_rate,
            evaluations,
            generation: 0,
        })
    }

    pub fn population(&self) -> usize {
        self.incumbents.len()
    }

    pub fn twin(&self) -> &KitchenTwin {
        &self.twin
    }

    pub fn bounds(&self) -> ObjectiveBounds {
        self.bounds
    }

    pub fn weights(&self) -> &[[f64; 3]] {
        &self.weights
    }

    pub fn neighbors(&self) -> &[Vec<usize>] {
        &self.neighbors
    }

    pub fn incumbents(&self) -> &[Incumbent] {
        &self.incumbents
    }

    pub fn ideal(&self) -> [f64; 3] {
        self.ideal
    }

    pub fn archive(&self) -> &ParetoArchive {
        &self.archive
    }

    pub fn evaluations(&self) -> u64 {
        self.evaluations
    }

    pub fn generation(&self) -> u32 {
        self.generation
    }

    /// Runs one generation: breed offspring from neighborhood parents
    /// (sequentially, so the random stream is fixed), evaluate them
    /// concurrently, then apply ideal-point updates, neighbor replacements
    /// and archive inserts in subproblem-index order.
    pub fn evolve(&mut self) {
        let n = self.incumbents.len();
        let mut offspring = Vec::with_capacity(n);
        for i in 0..n {
            let hood = &self.neighbors[i];
            let first = hood[self.rng.random_range(0..hood.len())];
            let mut second = hood[self.rng.random_range(0..hood.len())];
            while hood.len() > 1 && second == first {
                second = hood[self.rng.random_range(0..hood.len())];
            }
            let child = crossover(
                &self.incumbents[first].chromosome,
                &self.incumbents[second].chromosome,
                &mut self.rng,
            );
            let child = mutate(&self.twin, &child, self.mutation_rate, &mut self.rng);
            offspring.push(self.twin.repair(&child, &mut self.rng));
        }

        let twin = &self.twin;
        let evaluated: Vec<ObjectiveVector> = offspring
            .par_iter()
            .map(|c| twin.evaluate(&twin.decode(c)))
            .collect();
        self.evaluations += n as u64;

        for objectives in &evaluated {
            let normalized = self.bounds.normalize(objectives);
            for (best, seen) in self.ideal.iter_mut().zip(normalized) {
                *best = best.min(seen);
            }
        }
        for (i, (child, objectives)) in offspring.into_iter().zip(evaluated).enumerate() {
            let normalized = self.bounds.normalize(&objectives);
            let mut replaced = 0;
            for &j in &self.neighbors[i] {
                if replaced == MAX_REPLACEMENTS {
                    break;
                }
                if self.improves(j, &objectives, normalized) {
                    self.incumbents[j] = Incumbent {
                        chromosome: child.clone(),
                        objectives,
                        normalized,
                    };
                    replaced += 1;
                }
            }
            self.archive.insert(child, objectives);
        }
        self.generation += 1;
    }

    /// Whether a candidate strictly improves subproblem `j` under constrained
    /// comparison: less shortfall first, then a smaller Tchebycheff value.
    fn improves(&self, j: usize, objectives: &ObjectiveVector, normalized: [f64; 3]) -> bool {
        let incumbent = &self.incumbents[j];
        if objectives.coverage_shortfall_g != incumbent.objectives.coverage_shortfall_g {
            return objectives.coverage_shortfall_g < incumbent.objectives.coverage_shortfall_g;
        }
        let candidate = tchebycheff(normalized, self.weights[j], self.ideal);
        let current = tchebycheff(incumbent.normalized, self.weights[j], self.ideal);
        candidate < current
    }
}

/// Classic run loop: initialize, evolve for the configured number of
/// generations, return the archive with run statistics. Fixed (scenario,
/// params) give bit-identical outcomes regardless of worker count.
pub fn run(scenario: &Scenario, params: &MoeadParams) -> Result<RunOutcome, EngineError> {
    let started = Instant::now();
    let mut engine = Moead::new(scenario, params)?;
    for _ in 0..params.generations {
        engine.evolve();
    }
    Ok(RunOutcome {
        archive: engine.archive.clone(),
        ideal: engine.ideal,
        bounds: engine.bounds,
        stats: RunStats {
            evaluations: engine.evaluations,
            generations: engine.generation,
            wall: started.elapsed(),
        },
    })
}
