use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use kitchenforge_core::moead::{Moead, MoeadParams};
use kitchenforge_core::{KitchenTwin, Scenario};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn catalog() -> Scenario {
    Scenario::load(include_str!("../../../scenarios/one_hob.scenario")).unwrap()
}

fn bench_decode(c: &mut Criterion) {
    let twin = KitchenTwin::new(&catalog());
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let chromosome = twin.repair(&twin.random_chromosome(&mut rng), &mut rng);
    c.bench_function("decode_128_slots", |b| {
        b.iter(|| black_box(twin.decode(black_box(&chromosome))))
    });
}

fn bench_evaluate(c: &mut Criterion) {
    let twin = KitchenTwin::new(&catalog());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let chromosome = twin.repair(&twin.random_chromosome(&mut rng), &mut rng);
    let schedule = twin.decode(&chromosome);
    c.bench_function("evaluate_128_slots", |b| {
        b.iter(|| black_box(twin.evaluate(black_box(&schedule))))
    });
}

fn bench_repair(c: &mut Criterion) {
    let twin = KitchenTwin::new(&catalog());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let unallocated = kitchenforge_core::Chromosome {
        genes: (0..twin.slot_count())
            .map(|i| kitchenforge_core::Gene {
                allocation: twin.no_allocation_gene(i),
                priority: 0,
            })
            .collect(),
    };
    c.bench_function("repair_from_empty", |b| {
        b.iter(|| black_box(twin.repair(black_box(&unallocated), &mut rng)))
    });
}

fn bench_generation(c: &mut Criterion) {
    let scenario = catalog();
    let params = MoeadParams {
        weight_granularity: 12,
        neighborhood: 10,
        generations: 0,
        mutation_rate: None,
        seed: 42,
    };
    c.bench_function("moead_generation_91_subproblems", |b| {
        let mut engine = Moead::new(&scenario, &params).unwrap();
        b.iter(|| engine.evolve())
    });
}

criterion_group!(benches, bench_decode, bench_evaluate, bench_repair, bench_generation);
criterion_main!(benches);
