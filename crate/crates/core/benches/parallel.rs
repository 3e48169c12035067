//! Row-parallel kernels under the rayon pool versus a single worker.
//!
//! The single-thread pool runs exactly the same chunked code path, so the
//! comparison isolates the parallel speed-up. Building with
//! `--no-default-features` benchmarks the sequential fallback directly.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hop_core::fit::{em_step, normalized_loglik, FitConfig, LoglikScale};
use hop_core::model::{sample_returns, sample_rows};
use hop_core::nonparam::estimate_comoments;
use hop_core::synthetic::random_theta_with_nu;

fn kernels(c: &mut Criterion, label: &str, run: &(dyn Fn(&(dyn Fn() + Sync)) + Sync)) {
    let theta = random_theta_with_nu(&mut ChaCha8Rng::seed_from_u64(1), 10, 12.0);
    let returns = sample_returns(&theta, 20_000, 2).unwrap();
    let small = sample_returns(&random_theta_with_nu(&mut ChaCha8Rng::seed_from_u64(3), 20, 12.0), 2_000, 4).unwrap();
    let cfg = FitConfig::default();

    let mut g = c.benchmark_group("kernels");
    g.sample_size(20);
    g.bench_function(BenchmarkId::new("loglik_T20000_N10", label), |b| {
        b.iter(|| run(&|| {
            std::hint::black_box(normalized_loglik(&returns, &theta, LoglikScale::Mean).unwrap());
        }))
    });
    g.bench_function(BenchmarkId::new("em_step_T20000_N10", label), |b| {
        b.iter(|| run(&|| {
            std::hint::black_box(em_step(&returns, &theta, &cfg).unwrap());
        }))
    });
    g.bench_function(BenchmarkId::new("comoments_T2000_N20", label), |b| {
        b.iter(|| run(&|| {
            std::hint::black_box(estimate_comoments(&small).unwrap());
        }))
    });
    g.bench_function(BenchmarkId::new("sample_20000_N10", label), |b| {
        b.iter(|| run(&|| {
            std::hint::black_box(sample_rows(&theta, 20_000, 5).unwrap());
        }))
    });
    g.finish();
}

#[cfg(feature = "parallel")]
fn bench(c: &mut Criterion) {
    // both sides pay the same `install` hop into an explicit pool
    let full = rayon::ThreadPoolBuilder::new().build().unwrap();
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    kernels(c, "rayon", &|f| full.install(f));
    kernels(c, "one_thread", &|f| single.install(f));
}

#[cfg(not(feature = "parallel"))]
fn bench(c: &mut Criterion) {
    kernels(c, "sequential", &|f| f());
}

criterion_group!(benches, bench);
criterion_main!(benches);
