//! Random parameter sets for benchmarks and experiments.
//!
//! `mu`, `gamma` entries uniform on `[-0.1, 0.1]`; `Sigma = A A' / N + 0.1 I`
//! with `A` standard normal; `nu` uniform on `[9, 20]`.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::GhMstParams;

/// `A A' / N + ridge I`, mirrored so that it is exactly symmetric.
pub fn random_scatter<R: Rng + ?Sized>(rng: &mut R, n: usize, ridge: f64) -> DMatrix<f64> {
    let a = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let mut s = (&a * a.transpose()) / n as f64;
    for i in 0..n {
        for j in 0..i {
            s[(j, i)] = s[(i, j)];
        }
        s[(i, i)] += ridge;
    }
    s
}

/// One draw of the benchmark recipe.
pub fn random_theta<R: Rng + ?Sized>(rng: &mut R, n: usize) -> GhMstParams {
    let nu = rng.random_range(9.0..=20.0);
    random_theta_with_nu(rng, n, nu)
}

/// The benchmark recipe with `nu` fixed.
pub fn random_theta_with_nu<R: Rng + ?Sized>(rng: &mut R, n: usize, nu: f64) -> GhMstParams {
    let mu: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..=0.1)).collect();
    let gamma: Vec<f64> = (0..n).map(|_| rng.random_range(-0.1..=0.1)).collect();
    let sigma = random_scatter(rng, n, 0.1);
    GhMstParams::new(mu, sigma, gamma, nu).expect("ridge keeps the scatter positive definite")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn recipe_ranges() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let p = random_theta(&mut rng, 7);
            assert!((9.0..=20.0).contains(&p.nu()));
            assert!(p.mu().iter().chain(p.gamma()).all(|v| v.abs() <= 0.1));
            assert!((0..7).all(|i| p.sigma()[(i, i)] >= 0.1));
        }
        let a = random_theta(&mut ChaCha8Rng::seed_from_u64(4), 5);
        let b = random_theta(&mut ChaCha8Rng::seed_from_u64(4), 5);
        assert_eq!(a, b);
    }
}
