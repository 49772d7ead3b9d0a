use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use ucip_bench::fixture_model;
use ucip_core::entanglement::{partial_trace, von_neumann_entropy, Bipartition};
use ucip_core::qbm::{conditional_state, visible_from_index};
use ucip_core::Encoder;

fn thermal_state(c: &mut Criterion) {
    let mut group = c.benchmark_group("conditional_state");
    for n_hidden in [4, 6, 8] {
        let model = fixture_model(n_hidden);
        let v = visible_from_index(77);
        group.bench_with_input(BenchmarkId::from_parameter(n_hidden), &model, |b, m| {
            b.iter(|| conditional_state(m, black_box(&v)).unwrap())
        });
    }
    group.finish();
}

fn reduced_entropy(c: &mut Criterion) {
    let model = fixture_model(8);
    let rho = conditional_state(&model, &visible_from_index(77)).unwrap();
    let part = Bipartition::new(8, (0..4).collect()).unwrap();
    c.bench_function("partial_trace_entropy_8", |b| {
        b.iter(|| von_neumann_entropy(&partial_trace(black_box(&rho), &part).unwrap()).unwrap())
    });
}

fn encoder_build(c: &mut Criterion) {
    let model = fixture_model(6);
    let mut group = c.benchmark_group("encoder");
    group.sample_size(10);
    group.bench_function("build_6", |b| b.iter(|| Encoder::new(black_box(&model)).unwrap()));
    group.finish();
}

criterion_group!(benches, thermal_state, reduced_entropy, encoder_build);
criterion_main!(benches);
