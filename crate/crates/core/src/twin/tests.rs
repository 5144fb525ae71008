use super::*;
use crate::scenario::{Recipe, ScenarioBuilder};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn recipe(food: &str, variant: &str, amount: f64, zones: &[&str], pot: &str) -> Recipe {
    Recipe {
        food: food.into(),
        variant: variant.into(),
        predecessor: None,
        amount_g: amount,
        zones: zones.iter().map(|z| z.to_string()).collect(),
        pot: pot.into(),
        energy_kj: 350.0,
        duration_min: 15,
        cost_eur: 0.03,
        deficiency: 5.0,
    }
}

fn water_recipe() -> Recipe {
    recipe(
        "Boiled water",
        "A",
        1000.0,
        &["Hob(1)", "Hob(2)", "Hob(3)", "Hob(4)"],
        "Pot(1)",
    )
}

fn pasta_recipe() -> Recipe {
    let mut r = recipe(
        "Pasta",
        "A",
        100.0,
        &["Hob(1)", "Hob(2)", "Hob(3)", "Hob(4)"],
        "Pot(1)",
    );
    r.predecessor = Some(("Boiled water".into(), "A".into()));
    r.energy_kj = 840.0;
    r.duration_min = 30;
    r.cost_eur = 0.021;
    r.deficiency = 2.0;
    r
}

/// Chromosome with every slot unallocated.
fn all_unallocated(twin: &KitchenTwin) -> Chromosome {
    Chromosome {
        genes: (0..twin.slot_count())
            .map(|i| Gene {
                allocation: twin.no_allocation_gene(i),
                priority: 0,
            })
            .collect(),
    }
}

/// Allocates a slot to a specific resource by display name.
fn allocate(twin: &KitchenTwin, chromosome: &mut Chromosome, slot: usize, display: &str, prio: u32) {
    let choice = twin
        .domain(slot)
        .iter()
        .position(|&r| twin.scenario().resources[r].display_name() == display)
        .unwrap_or_else(|| panic!("{display} not in the domain of slot {slot}"));
    chromosome.genes[slot] = Gene {
        allocation: choice as u32,
        priority: prio,
    };
}

fn slot_named(twin: &KitchenTwin, name: &str) -> usize {
    twin.slots()
        .iter()
        .position(|s| s.name == name)
        .unwrap_or_else(|| panic!("no slot named {name}"))
}

#[test]
fn subtask_rule() {
    assert_eq!(subtask_duration(120), 12);
    assert_eq!(subtask_duration(20), 2);
    assert_eq!(subtask_duration(5), 1);
}

#[test]
fn all_unallocated_decodes_to_empty_success() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .order("Boiled water", 5000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let schedule = twin.decode(&all_unallocated(&twin));
    assert!(schedule.is_empty());
    assert_eq!(schedule.status, ScheduleStatus::Succeeded);
    let v = twin.evaluate(&schedule);
    assert_eq!(v.makespan_min, 0);
    assert_eq!(v.energy_kj, 0.0);
    assert_eq!(v.coverage_shortfall_g, 5000.0);
}

#[test]
fn single_execution_objectives() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .order("Boiled water", 1000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut c = all_unallocated(&twin);
    allocate(&twin, &mut c, 0, "Hob(1) Pot(1)", 0);
    let v = twin.evaluate(&twin.decode(&c));
    assert_eq!(v.makespan_min, 15);
    assert_eq!(v.energy_kj, 350.0);
    assert_eq!(v.deficiency, 5.0);
    assert_eq!(v.cost_eur, 0.03);
    assert_eq!(v.coverage_shortfall_g, 0.0);
}

#[test]
fn five_executions_sum_linearly() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .order("Boiled water", 5000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut c = all_unallocated(&twin);
    for i in 0..5 {
        allocate(&twin, &mut c, i, "Hob(1) Pot(1)", i as u32);
    }
    let schedule = twin.decode(&c);
    let v = twin.evaluate(&schedule);
    // Cross-check by accumulating per main task.
    let mut energy = 0.0;
    let mut deficiency = 0.0;
    for t in schedule.iter_tasks() {
        if let TaskKind::Main { slot } = t.kind {
            let r = &s.recipes[twin.slots()[slot].recipe];
            energy += r.energy_kj;
            deficiency += r.deficiency;
        }
    }
    assert_eq!(v.energy_kj, 1750.0);
    assert_eq!(v.energy_kj, energy);
    assert_eq!(v.deficiency, 25.0);
    assert_eq!(v.deficiency, deficiency);
    assert_eq!(v.coverage_shortfall_g, 0.0);
}

#[test]
fn higher_priority_goes_first_and_swapping_swaps_order() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .order("Boiled water", 2000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);

    let order_on_hob1 = |p0: u32, p1: u32| -> Vec<usize> {
        let mut c = all_unallocated(&twin);
        allocate(&twin, &mut c, 0, "Hob(1) Pot(1)", p0);
        allocate(&twin, &mut c, 1, "Hob(1) Pot(1)", p1);
        twin.decode(&c).tasks[0]
            .iter()
            .filter_map(|t| match t.kind {
                TaskKind::Main { slot } => Some(slot),
                _ => None,
            })
            .collect()
    };
    assert_eq!(order_on_hob1(1, 0), vec![0, 1]);
    assert_eq!(order_on_hob1(0, 1), vec![1, 0]);
}

#[test]
fn setup_inserted_between_different_recipes() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .recipe(pasta_recipe())
        .order("Boiled water", 1000.0)
        .order("Pasta", 100.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut c = all_unallocated(&twin);
    allocate(&twin, &mut c, slot_named(&twin, "Boiled water A 0"), "Hob(1) Pot(1)", 1);
    allocate(&twin, &mut c, slot_named(&twin, "Pasta A 0"), "Hob(1) Pot(1)", 0);
    let schedule = twin.decode(&c);
    let on_hob1 = &schedule.tasks[0];
    // water main, setup, pasta subtask, pasta main
    assert_eq!(on_hob1.len(), 4);
    assert_eq!(on_hob1[0], Task {
        kind: TaskKind::Main { slot: 0 },
        resource: 0,
        start: 0,
        end: 15,
    });
    assert_eq!(on_hob1[1].kind, TaskKind::Setup { from: 0, to: 1 });
    assert_eq!((on_hob1[1].start, on_hob1[1].end), (15, 25));
    assert_eq!(on_hob1[2].kind, TaskKind::Subtask { slot: 1 });
    assert_eq!((on_hob1[2].start, on_hob1[2].end), (25, 28));
    assert_eq!((on_hob1[3].start, on_hob1[3].end), (28, 58));
}

#[test]
fn no_setup_between_same_recipe() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .order("Boiled water", 2000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut c = all_unallocated(&twin);
    allocate(&twin, &mut c, 0, "Hob(1) Pot(1)", 1);
    allocate(&twin, &mut c, 1, "Hob(1) Pot(1)", 0);
    let schedule = twin.decode(&c);
    assert!(schedule
        .iter_tasks()
        .all(|t| !matches!(t.kind, TaskKind::Setup { .. })));
    assert_eq!(schedule.makespan(), 30);
}

#[test]
fn duration_override_applies_to_exact_resource_only() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .order("Boiled water", 2000.0)
        .effect(crate::metrics::ObservableEffect::DurationOverride {
            recipe: "Boiled water A".into(),
            zone: "Hob(1)".into(),
            pot: "Pot(1)".into(),
            start_min: 0,
            end_min: 40,
        })
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut c = all_unallocated(&twin);
    allocate(&twin, &mut c, 0, "Hob(1) Pot(1)", 1);
    allocate(&twin, &mut c, 1, "Hob(4) Pot(1)", 0);
    let schedule = twin.decode(&c);
    let spans: Vec<(usize, Minutes)> = schedule
        .iter_tasks()
        .filter_map(|t| match t.kind {
            TaskKind::Main { .. } => Some((t.resource, t.end - t.start)),
            _ => None,
        })
        .collect();
    assert!(spans.contains(&(0, 40)), "{spans:?}");
    assert!(spans.contains(&(3, 15)), "{spans:?}");
}

#[test]
fn allocated_successor_without_predecessor_is_infeasible() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .recipe(pasta_recipe())
        .order("Pasta", 100.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut c = all_unallocated(&twin);
    let pasta = slot_named(&twin, "Pasta A 0");
    allocate(&twin, &mut c, pasta, "Hob(1) Pot(1)", 0);
    let schedule = twin.decode(&c);
    match &schedule.status {
        ScheduleStatus::Infeasible { reason } => assert!(reason.contains("Pasta A 0"), "{reason}"),
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn exclusion_group_members_never_overlap() {
    // Hob(1) and Hob(5) share an exclusion group; Hob(1) and Hob(4) do not.
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .recipe(recipe("Boiled water", "B", 2000.0, &["Hob(5)", "Hob(6)"], "Pot(2)"))
        .order("Boiled water", 2000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let b = slot_named(&twin, "Boiled water B 0");

    let mut coupled = all_unallocated(&twin);
    allocate(&twin, &mut coupled, 0, "Hob(1) Pot(1)", 1);
    allocate(&twin, &mut coupled, b, "Hob(5) Pot(2)", 0);
    let schedule = twin.decode(&coupled);
    let mains: Vec<&Task> = schedule.iter_tasks().collect();
    assert_eq!(mains.len(), 2);
    let (a, bt) = (mains[0], mains[1]);
    assert!(a.end <= bt.start || bt.end <= a.start, "coupled zones overlap");

    let mut free = all_unallocated(&twin);
    allocate(&twin, &mut free, 0, "Hob(4) Pot(1)", 1);
    allocate(&twin, &mut free, b, "Hob(5) Pot(2)", 0);
    let schedule = twin.decode(&free);
    assert!(schedule.iter_tasks().all(|t| t.start == 0), "independent zones start together");
}

#[test]
fn decode_is_deterministic() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .recipe(pasta_recipe())
        .order("Boiled water", 3000.0)
        .order("Pasta", 500.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let c = twin.repair(&twin.random_chromosome(&mut rng), &mut rng);
        assert_eq!(twin.decode(&c), twin.decode(&c));
    }
}

#[test]
fn permuting_priorities_keeps_objectives_except_makespan() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .recipe(pasta_recipe())
        .order("Boiled water", 3000.0)
        .order("Pasta", 500.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let c = twin.random_chromosome(&mut rng);
        let v = twin.evaluate(&twin.decode(&c));
        let mut permuted = c.clone();
        let l = permuted.genes.len() as u32;
        for gene in &mut permuted.genes {
            gene.priority = (gene.priority * 7 + 3) % l;
        }
        let w = twin.evaluate(&twin.decode(&permuted));
        assert_eq!(v.energy_kj, w.energy_kj);
        assert_eq!(v.deficiency, w.deficiency);
        assert_eq!(v.cost_eur, w.cost_eur);
        assert_eq!(v.coverage_shortfall_g, w.coverage_shortfall_g);
    }
}

#[test]
fn moving_to_an_idle_uncoupled_resource_helps() {
    // Two water slots contend on Hob(1); Hob(4) is idle and shares no
    // exclusion group with Hob(1). Moving one slot there must not increase
    // the makespan and must keep deficiency unchanged.
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .order("Boiled water", 2000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut contended = all_unallocated(&twin);
    allocate(&twin, &mut contended, 0, "Hob(1) Pot(1)", 1);
    allocate(&twin, &mut contended, 1, "Hob(1) Pot(1)", 0);
    let before = twin.evaluate(&twin.decode(&contended));

    let mut spread = contended.clone();
    allocate(&twin, &mut spread, 1, "Hob(4) Pot(1)", 0);
    let after = twin.evaluate(&twin.decode(&spread));

    assert!(after.makespan_min <= before.makespan_min);
    assert_eq!(after.deficiency, before.deficiency);
    assert_eq!(after.makespan_min, 15);
    assert_eq!(before.makespan_min, 30);
}

#[test]
fn repair_covers_an_order_from_nothing() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .recipe(pasta_recipe())
        .order("Pasta", 1000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let repaired = twin.repair(&all_unallocated(&twin), &mut rng);
    let allocated_pasta = repaired
        .genes
        .iter()
        .enumerate()
        .filter(|(i, g)| {
            twin.scenario().recipes[twin.slots()[*i].recipe].food == "Pasta"
                && twin.allocated_resource(*i, **g).is_some()
        })
        .count();
    assert!(allocated_pasta >= 4, "got {allocated_pasta} pasta genes");
    let v = twin.evaluate(&twin.decode(&repaired));
    assert_eq!(v.coverage_shortfall_g, 0.0, "repair must cover the order");
}

#[test]
fn repair_is_identity_on_covering_chromosomes() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .order("Boiled water", 2000.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut c = all_unallocated(&twin);
    allocate(&twin, &mut c, 0, "Hob(1) Pot(1)", 0);
    allocate(&twin, &mut c, 1, "Hob(2) Pot(1)", 1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert_eq!(twin.repair(&c, &mut rng), c);
}

#[test]
fn repair_ignores_empty_orders() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let c = all_unallocated(&twin);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    assert_eq!(twin.repair(&c, &mut rng), c);
}

#[test]
fn interval_lengths_match_durations() {
    let s = ScenarioBuilder::new()
        .standard_hob("Hob")
        .recipe(water_recipe())
        .recipe(pasta_recipe())
        .order("Boiled water", 2000.0)
        .order("Pasta", 300.0)
        .build()
        .unwrap();
    let twin = KitchenTwin::new(&s);
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..30 {
        let c = twin.repair(&twin.random_chromosome(&mut rng), &mut rng);
        let schedule = twin.decode(&c);
        for t in schedule.iter_tasks() {
            match t.kind {
                TaskKind::Main { slot } => {
                    let gene = c.genes[slot];
                    let choice = gene.allocation as usize;
                    assert_eq!(t.end - t.start, twin.choice_duration(slot, choice));
                }
                TaskKind::Subtask { slot } => {
                    let gene = c.genes[slot];
                    let main = twin.choice_duration(slot, gene.allocation as usize);
                    assert_eq!(t.end - t.start, subtask_duration(main));
                }
                TaskKind::Setup { .. } => {
                    assert_eq!(t.end - t.start, s.setup_duration);
                }
            }
        }
    }
}
