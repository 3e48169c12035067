use rand::Rng;

use crate::model::GhMstParams;
use crate::synthetic::random_scatter;

/// Parameters with non-trivial skew: `mu`, `gamma` uniform on `[-0.5, 0.5]`.
pub fn random_params<R: Rng + ?Sized>(rng: &mut R, n: usize, nu: f64) -> GhMstParams {
    let mu = random_vec(rng, n, 0.5);
    let gamma = random_vec(rng, n, 0.5);
    let sigma = random_scatter(rng, n, 0.1);
    GhMstParams::new(mu, sigma, gamma, nu).unwrap()
}

pub fn random_vec<R: Rng + ?Sized>(rng: &mut R, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}
