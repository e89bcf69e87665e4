//! Compares the rayon-parallel segmentation pass against the sequential
//! fallback, plus the per-block solver cost in isolation.
//!
//! Run with `cargo bench -p scseg`.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use scseg::basis::{BasisMatrix, ScaledBasis};
use scseg::segment::{segment_image, segment_image_serial, SegmenterConfig};
use scseg::solver::{solve_lasso, SolverState};
use scseg::synth::smooth_with_strokes;

fn bench_segment_image(c: &mut Criterion) {
    let config = SegmenterConfig::default();
    let mut group = c.benchmark_group("segment_image");
    group.sample_size(10);
    for side in [256usize, 512] {
        let synth = smooth_with_strokes(side, side, side / 4, 60.0, 42);
        group.bench_with_input(BenchmarkId::new("rayon", side), &synth.image, |b, img| {
            b.iter(|| segment_image(black_box(img), &config).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("serial", side), &synth.image, |b, img| {
            b.iter(|| segment_image_serial(black_box(img), &config).unwrap())
        });
    }
    group.finish();
}

fn bench_solver(c: &mut Criterion) {
    let config = SegmenterConfig::default();
    let basis = BasisMatrix::build(config.n, config.k).unwrap();
    let scaled = ScaledBasis::new(&basis, config.q).unwrap();
    let state = SolverState::new(scaled, config.rho).unwrap();
    let synth = smooth_with_strokes(64, 64, 12, 60.0, 7);
    let f = synth.image.data().to_vec();
    let lambda = 0.1 * f.iter().fold(0.0_f64, |m, &v| m.max(v));

    c.bench_function("solve_lasso_64x64_100it", |b| {
        b.iter(|| solve_lasso(black_box(&f), &state, lambda, 100).unwrap())
    });
}

criterion_group!(benches, bench_segment_image, bench_solver);
criterion_main!(benches);
