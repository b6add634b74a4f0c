//! Parallel against sequential execution of the main kernels.
//!
//! Each kernel runs on a one-worker pool and on the default pool. Building
//! with `--no-default-features` swaps in the sequential fallback entirely.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use noisestab::gaussian::{noise_stability, noise_stability_mc, Correlation, GridOperator, Partition, QuadratureGrid};
use noisestab::par::with_threads;
use noisestab::voting::{discrete_stability_exact, discrete_stability_mc, VotingRule};
use std::hint::black_box;

const POOLS: [(&str, usize); 2] = [("sequential", 1), ("parallel", 0)];

fn kernels(c: &mut Criterion) {
    let rho = Correlation::new(0.3).unwrap();
    let half = Partition::halfspaces(2, vec![1.0, 0.0], 0.0).unwrap();
    let cones = Partition::simplex_cones(2, 3).unwrap();
    let g2 = QuadratureGrid::new(2, 64).unwrap();
    let g3 = QuadratureGrid::new(3, 32).unwrap();
    let op2 = GridOperator::new(&g2, rho).unwrap();
    let op3 = GridOperator::new(&g3, rho).unwrap();
    let h2: Vec<f64> = (0..g2.len()).map(|k| (k % 7) as f64 / 7.0).collect();
    let h3: Vec<f64> = (0..g3.len()).map(|k| (k % 5) as f64 / 5.0).collect();
    let plural8 = VotingRule::plurality(3, 8).unwrap();
    let plural101 = VotingRule::plurality(3, 101).unwrap();

    let mut group = c.benchmark_group("kernels");
    group.sample_size(10);
    for (label, threads) in POOLS {
        group.bench_with_input(BenchmarkId::new("mc_halfspace_200k", label), &threads, |b, &t| {
            b.iter(|| with_threads(t, || noise_stability_mc(black_box(&half), rho, 200_000, 1).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("grid_apply_64x64", label), &threads, |b, &t| {
            b.iter(|| with_threads(t, || op2.apply(black_box(&h2))))
        });
        group.bench_with_input(BenchmarkId::new("grid_apply_32x32x32", label), &threads, |b, &t| {
            b.iter(|| with_threads(t, || op3.apply(black_box(&h3))))
        });
        group.bench_with_input(BenchmarkId::new("cone_quadrature", label), &threads, |b, &t| {
            b.iter(|| with_threads(t, || noise_stability(black_box(&cones), rho).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("plurality_exact_3x8", label), &threads, |b, &t| {
            b.iter(|| with_threads(t, || discrete_stability_exact(black_box(&plural8), rho).unwrap()))
        });
        group.bench_with_input(BenchmarkId::new("plurality_mc_3x101", label), &threads, |b, &t| {
            b.iter(|| with_threads(t, || discrete_stability_mc(black_box(&plural101), rho, 100_000, 1).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
