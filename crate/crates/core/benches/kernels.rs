//! Grid kernels on one worker thread against the global pool.
//!
//! Each kernel runs twice per group: inside a dedicated single-thread pool
//! and on the global pool (all cores unless `RAYON_NUM_THREADS` says
//! otherwise). Build with `--no-default-features` to time the sequential
//! fallback instead; both variants then coincide.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use psclab::conformal::ConformalOperator;
use psclab::experiments::{collar_sweep, Scenario};
use psclab::hypersurface::{mean_curvature, GraphHypersurface};
use psclab::metric::curvature;
use psclab::scenarios::{bumpy_slab, perturbed_torus};
use psclab::solver::{default_height, solve_minimal_graph, SolverOptions};
use psclab::stability::second_variation_form;

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let global = rayon::current_num_threads();
    vec![
        ("1-thread", rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap()),
        ("global", rayon::ThreadPoolBuilder::new().num_threads(global).build().unwrap()),
    ]
}

fn kernels(c: &mut Criterion) {
    let pools = pools();

    let metric = perturbed_torus(24, 0.3).unwrap();
    let mut g = c.benchmark_group("curvature_24^3");
    g.sample_size(10);
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| curvature(&metric).unwrap()))
        });
    }
    g.finish();

    let amb = bumpy_slab(3, 32, 33, 1.0).unwrap();
    let graph = GraphHypersurface::constant(&amb, 0, default_height(&amb, 0)).unwrap();
    let mut g = c.benchmark_group("mean_curvature_32x33");
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| mean_curvature(&graph, &amb).unwrap()))
        });
    }
    g.finish();

    let (minimal, _) = solve_minimal_graph(&amb, &graph, &SolverOptions::default()).unwrap();
    let mut g = c.benchmark_group("second_variation_32x33");
    g.sample_size(20);
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| second_variation_form(&minimal, &amb).unwrap()))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("conformal_assembly_24^3");
    g.sample_size(10);
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| ConformalOperator::assemble(&metric, 3).unwrap()))
        });
    }
    g.finish();

    // Independent solves over the collar lengths: the coarsest parallel grain.
    let amb = bumpy_slab(3, 16, 9, 1.0).unwrap();
    let scenario = Scenario::new(amb, 0);
    let mut g = c.benchmark_group("collar_sweep_16x9");
    g.sample_size(10);
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| pool.install(|| collar_sweep(&scenario).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
