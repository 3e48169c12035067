use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use hop_core::simplex::SimplexPoint;
use hop_core::solver::{crra_lambdas, solve, MvskObjective, SolverConfig, SolverMode};
use hop_core::synthetic::random_theta;

fn bench(c: &mut Criterion) {
    let mut g = c.benchmark_group("mvsk_solve");
    g.sample_size(20);
    for n in [50, 100, 200, 400] {
        let theta = random_theta(&mut ChaCha8Rng::seed_from_u64(n as u64), n);
        let obj = MvskObjective::parametric(crra_lambdas(10.0).unwrap(), theta).unwrap();
        let w0 = SimplexPoint::uniform(n).into_vec();
        for mode in [SolverMode::Rfpa, SolverMode::Pgd] {
            let cfg = SolverConfig { mode, ..SolverConfig::default() };
            g.bench_with_input(BenchmarkId::new(format!("{mode:?}"), n), &n, |b, _| {
                b.iter(|| solve(&w0, &obj, &cfg).unwrap())
            });
        }
    }
    g.finish();
}

criterion_group!(benches, bench);
criterion_main!(benches);
