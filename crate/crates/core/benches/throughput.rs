//! Monte Carlo throughput, data-parallel against sequential.
//!
//! With the default `parallel` feature each sweep runs in a one-thread pool
//! and in a pool of every available core. Built with
//! `--no-default-features` it runs the sequential fallback.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};
use lrfhss::harness::{run_miss_detection_sweep, run_per_sweep, SimConfig};
use lrfhss::txchain::Modulation;

fn per_config() -> SimConfig {
    SimConfig {
        modulations: vec![Modulation::Gmsk],
        snr_grid_db: vec![0.0, 2.0],
        doppler_rates: vec![0.0],
        n_trials: 32,
        ..SimConfig::default()
    }
}

fn miss_config() -> SimConfig {
    SimConfig {
        search_interval_bits: vec![48],
        ..per_config()
    }
}

fn trials(cfg: &SimConfig) -> u64 {
    (cfg.n_trials * cfg.snr_grid_db.len() * cfg.modulations.len()) as u64
}

#[cfg(feature = "parallel")]
fn modes() -> Vec<(String, Option<rayon::ThreadPool>)> {
    let all = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut counts = vec![1];
    if all > 1 {
        counts.push(all);
    }
    counts
        .into_iter()
        .map(|n| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().expect("thread pool");
            (format!("parallel-{n}"), Some(pool))
        })
        .collect()
}

#[cfg(not(feature = "parallel"))]
fn modes() -> Vec<(String, Option<rayon::ThreadPool>)> {
    vec![("sequential".into(), None)]
}

fn run<R: Send>(pool: &Option<rayon::ThreadPool>, f: impl FnOnce() -> R + Send) -> R {
    match pool {
        Some(p) => p.install(f),
        None => f(),
    }
}

fn sweeps(c: &mut Criterion) {
    let per = per_config();
    let miss = miss_config();
    let modes = modes();

    let mut g = c.benchmark_group("per_sweep");
    g.sample_size(10).throughput(Throughput::Elements(trials(&per)));
    for (name, pool) in &modes {
        g.bench_with_input(BenchmarkId::from_parameter(name), &per, |b, cfg| {
            b.iter(|| run(pool, || run_per_sweep(cfg).expect("sweep")))
        });
    }
    g.finish();

    let mut g = c.benchmark_group("miss_sweep");
    g.sample_size(10).throughput(Throughput::Elements(trials(&miss)));
    for (name, pool) in &modes {
        g.bench_with_input(BenchmarkId::from_parameter(name), &miss, |b, cfg| {
            b.iter(|| run(pool, || run_miss_detection_sweep(cfg).expect("sweep")))
        });
    }
    g.finish();
}

criterion_group!(benches, sweeps);
criterion_main!(benches);
