//! Sequential vs parallel fitting on simulated tournaments.
//!
//! `cargo bench -p scelo-core` runs both modes; build with
//! `--no-default-features` to check the fallback path compiles the same way.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use scelo::batch_fit::{fit_pml, BatchConfig};
use scelo::lls_fit::{build_advantage_graph, fit_lls, LlsConfig, FIT_PRIOR_WEIGHT};
use scelo::probability::MomentMethod;
use scelo::simulator::{generate_population, play_schedule, SimConfig};
use scelo::{build_graph, Execution, TournamentGraph};

fn simulated(eras: usize, agents_per_era: usize) -> TournamentGraph {
    let cfg = SimConfig { eras, agents_per_era, seed: 7, ..SimConfig::default() };
    let agents = generate_population(&cfg).unwrap();
    build_graph(&play_schedule(&agents, &cfg).unwrap(), false).unwrap()
}

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn converged_fits(c: &mut Criterion) {
    let graph = simulated(10, 20);
    let adv = build_advantage_graph(&graph, FIT_PRIOR_WEIGHT, MomentMethod::Approx).unwrap();
    let mut group = c.benchmark_group("fit_200_agents");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_with_input(BenchmarkId::new("pml", name), &execution, |b, &execution| {
            let cfg = BatchConfig { execution, ..BatchConfig::default() };
            b.iter(|| fit_pml(black_box(&graph), &cfg).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("lls", name), &execution, |b, &execution| {
            let cfg = LlsConfig { execution, ..LlsConfig::default() };
            b.iter(|| fit_lls(black_box(&adv), &cfg).unwrap())
        });
    }
    group.finish();
}

// Fixed sweep budget on a large graph, where per-sweep work dominates.
fn sweeps(c: &mut Criterion) {
    let graph = simulated(40, 250);
    let adv = build_advantage_graph(&graph, FIT_PRIOR_WEIGHT, MomentMethod::Approx).unwrap();
    let mut group = c.benchmark_group("20_sweeps_10000_agents");
    group.sample_size(10);
    for (name, execution) in MODES {
        group.bench_with_input(BenchmarkId::new("pml", name), &execution, |b, &execution| {
            let cfg = BatchConfig { execution, max_iters: 20, tol: 1e-12, ..BatchConfig::default() };
            b.iter(|| fit_pml(black_box(&graph), &cfg).is_err())
        });
        group.bench_with_input(BenchmarkId::new("lls", name), &execution, |b, &execution| {
            let cfg = LlsConfig { execution, max_iters: 20, tol: 1e-12, ..LlsConfig::default() };
            b.iter(|| fit_lls(black_box(&adv), &cfg).is_err())
        });
    }
    group.finish();
}

criterion_group!(benches, converged_fits, sweeps);
criterion_main!(benches);
