//! External non-dominated archive under constrained domination.

use crate::twin::{Chromosome, ObjectiveVector};

#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub chromosome: Chromosome,
    pub objectives: ObjectiveVector,
}

/// Mutually non-dominated (chromosome, objectives) pairs. Insertion removes
/// newly dominated members; a candidate equal to or dominated by an existing
/// member is rejected, so each distinct objective vector appears once.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParetoArchive {
    entries: Vec<ArchiveEntry>,
}

impl ParetoArchive {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, chromosome: Chromosome, objectives: ObjectiveVector) -> bool {
        if self
            .entries
            .iter()
            .any(|e| e.objectives.covers(&objectives))
        {
            return false;
        }
        self.entries.retain(|e| !objectives.dominates(&e.objectives));
        self.entries.push(ArchiveEntry {
            chromosome,
            objectives,
        });
        true
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ArchiveEntry> {
        self.entries.iter()
    }

    /// Entries in canonical order: makespan, then energy, then deficiency,
    /// then cost.
    pub fn sorted(&self) -> Vec<&ArchiveEntry> {
        let mut out: Vec<&ArchiveEntry> = self.entries.iter().collect();
        out.sort_by(|a, b| {
            let (x, y) = (&a.objectives, &b.objectives);
            x.makespan_min
                .cmp(&y.makespan_min)
                .then(x.energy_kj.total_cmp(&y.energy_kj))
                .then(x.deficiency.total_cmp(&y.deficiency))
                .then(x.cost_eur.total_cmp(&y.cost_eur))
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(makespan: u64, energy: f64, deficiency: f64, shortfall: f64) -> ObjectiveVector {
        ObjectiveVector {
            makespan_min: makespan,
            energy_kj: energy,
            deficiency,
            cost_eur: 0.0,
            coverage_shortfall_g: shortfall,
        }
    }

    fn c() -> Chromosome {
        Chromosome { genes: Vec::new() }
    }

    #[test]
    fn dominated_candidates_are_rejected() {
        let mut archive = ParetoArchive::new();
        assert!(archive.insert(c(), v(10, 10.0, 10.0, 0.0)));
        assert!(!archive.insert(c(), v(10, 10.0, 11.0, 0.0)));
        assert_eq!(archive.len(), 1);
    }

    #[test]
    fn dominating_candidates_evict() {
        let mut archive = ParetoArchive::new();
        archive.insert(c(), v(10, 10.0, 10.0, 0.0));
        archive.insert(c(), v(20, 5.0, 10.0, 0.0));
        assert!(archive.insert(c(), v(10, 5.0, 10.0, 0.0)));
        assert_eq!(archive.len(), 1);
    }

    #[test]
    fn equal_vectors_keep_the_first_entry() {
        let mut archive = ParetoArchive::new();
        assert!(archive.insert(c(), v(10, 10.0, 10.0, 0.0)));
        assert!(!archive.insert(c(), v(10, 10.0, 10.0, 0.0)));
        assert_eq!(archive.len(), 1);
    }

    #[test]
    fn covering_solutions_dominate_shortfall() {
        let mut archive = ParetoArchive::new();
        archive.insert(c(), v(5, 1.0, 1.0, 100.0));
        assert!(archive.insert(c(), v(500, 500.0, 500.0, 0.0)));
        assert_eq!(archive.len(), 1);
        assert!(archive.iter().all(|e| e.objectives.feasible()));
    }

    #[test]
    fn smaller_shortfall_wins_among_infeasible() {
        let a = v(5, 1.0, 1.0, 100.0);
        let b = v(1, 1.0, 1.0, 200.0);
        assert!(a.dominates(&b));
        assert!(!b.dominates(&a));
    }

    #[test]
    fn members_are_mutually_non_dominated() {
        let mut archive = ParetoArchive::new();
        let vectors = [
            v(10, 30.0, 3.0, 0.0),
            v(20, 20.0, 2.0, 0.0),
            v(30, 10.0, 1.0, 0.0),
            v(15, 25.0, 9.0, 0.0),
            v(9, 31.0, 3.0, 0.0),
        ];
        for x in vectors {
            archive.insert(c(), x);
        }
        for a in archive.iter() {
            for b in archive.iter() {
                if a.objectives != b.objectives {
                    assert!(!a.objectives.dominates(&b.objectives));
                }
            }
        }
    }

    #[test]
    fn sorted_is_canonical() {
        let mut archive = ParetoArchive::new();
        archive.insert(c(), v(30, 10.0, 1.0, 0.0));
        archive.insert(c(), v(10, 30.0, 3.0, 0.0));
        archive.insert(c(), v(20, 20.0, 2.0, 0.0));
        let makespans: Vec<u64> = archive
            .sorted()
            .iter()
            .map(|e| e.objectives.makespan_min)
            .collect();
        assert_eq!(makespans, vec![10, 20, 30]);
    }
}
