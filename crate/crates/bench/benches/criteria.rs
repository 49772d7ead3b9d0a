use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use ucip_bench::{fixture_dataset, fixture_model};
use ucip_core::criteria::{acm, compute_criteria, spi, CriteriaConfig};
use ucip_core::Encoder;

fn per_trajectory(c: &mut Criterion) {
    let encoder = Encoder::new(&fixture_model(6)).unwrap();
    let traj = fixture_dataset(1).remove(0);
    let cfg = CriteriaConfig::default();
    c.bench_function("compute_criteria", |b| {
        b.iter(|| compute_criteria(&encoder, black_box(&traj), &cfg).unwrap())
    });
    c.bench_function("spi", |b| b.iter(|| spi(black_box(&traj), 3)));
    c.bench_function("acm", |b| b.iter(|| acm(black_box(&traj), 20)));
}

criterion_group!(benches, per_trajectory);
criterion_main!(benches);
