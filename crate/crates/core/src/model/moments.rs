//! Closed-form moments of portfolio returns under the skew-t model.
//!
//! Everything here reduces to the three scalars `w'mu`, `s = w'gamma` and
//! `q = w'Sigma w` plus the vector `Sigma w`, so values and gradients cost
//! one matrix-vector product. Hessians are rank-structured `N x N` sums.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::coefficients::{MomentCoefficients, PartialCoefficients};
use super::params::GhMstParams;
use crate::error::{check_dim, Result};
use crate::nonparam::{fill_symmetric3, fill_symmetric4, CoMomentTensors};

/// Default guard on `N` for dense tensor reconstruction.
pub const RECONSTRUCT_CAP: usize = 32;

/// First four central moments of `w'r`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PortfolioMoments {
    pub phi1: f64,
    pub phi2: f64,
    pub phi3: f64,
    pub phi4: f64,
}

impl PortfolioMoments {
    pub fn as_array(&self) -> [f64; 4] {
        [self.phi1, self.phi2, self.phi3, self.phi4]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentGradients {
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub phi3: Vec<f64>,
    pub phi4: Vec<f64>,
}

impl MomentGradients {
    pub fn as_array(&self) -> [&[f64]; 4] {
        [&self.phi1, &self.phi2, &self.phi3, &self.phi4]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentHessians {
    pub phi3: DMatrix<f64>,
    pub phi4: DMatrix<f64>,
}

struct Scalars {
    m: f64,
    s: f64,
    q: f64,
    sigma_w: Vec<f64>,
}

fn scalars(w: &[f64], p: &GhMstParams) -> Result<Scalars> {
    check_dim(p.n_assets(), w.len())?;
    let sigma_w = p.sigma_times(w);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    Ok(Scalars {
        m: dot(w, p.mu()),
        s: dot(w, p.gamma()),
        q: dot(w, &sigma_w),
        sigma_w,
    })
}

fn coefficients(p: &GhMstParams) -> Result<MomentCoefficients> {
    p.require_nu_above(8.0, "higher-order portfolio moments")?;
    MomentCoefficients::new(p.nu())
}

/// Mean `mu + a1 gamma` and covariance `a21 Sigma + a22 gamma gamma'`.
pub fn mean_and_covariance(p: &GhMstParams) -> Result<(Vec<f64>, DMatrix<f64>)> {
    p.require_nu_above(4.0, "the covariance")?;
    let c = PartialCoefficients::new(p.nu())?;
    let (a1, a22) = (c.a1.unwrap_or(f64::NAN), c.a22.unwrap_or(f64::NAN));
    let n = p.n_assets();
    let mean = p.mu().iter().zip(p.gamma()).map(|(m, g)| m + a1 * g).collect();
    let g = p.gamma();
    let cov = DMatrix::from_fn(n, n, |i, j| a1 * p.sigma()[(i, j)] + a22 * g[i] * g[j]);
    Ok((mean, cov))
}

fn moments_from(a: &MomentCoefficients, sc: &Scalars) -> PortfolioMoments {
    let (s, q) = (sc.s, sc.q);
    PortfolioMoments {
        phi1: sc.m + a.a1 * s,
        phi2: a.a21 * q + a.a22 * s * s,
        phi3: a.a31 * s.powi(3) + a.a32 * s * q,
        phi4: a.a41 * s.powi(4) + a.a42 * s * s * q + a.a43 * q * q,
    }
}

fn gradients_from(a: &MomentCoefficients, sc: &Scalars, p: &GhMstParams) -> MomentGradients {
    let (s, q) = (sc.s, sc.q);
    let g = p.gamma();
    let sw = &sc.sigma_w;
    let combine = |cg: f64, csw: f64| -> Vec<f64> { g.iter().zip(sw).map(|(gi, si)| cg * gi + csw * si).collect() };
    MomentGradients {
        phi1: p.mu().iter().zip(g).map(|(m, gi)| m + a.a1 * gi).collect(),
        phi2: combine(2.0 * a.a22 * s, 2.0 * a.a21),
        phi3: combine(3.0 * a.a31 * s * s + a.a32 * q, 2.0 * a.a32 * s),
        phi4: combine(
            4.0 * a.a41 * s.powi(3) + 2.0 * a.a42 * q * s,
            2.0 * a.a42 * s * s + 4.0 * a.a43 * q,
        ),
    }
}

/// `phi1..phi4` of `w'r` in `O(N^2)`; requires `nu > 8`.
pub fn portfolio_moments(w: &[f64], p: &GhMstParams) -> Result<PortfolioMoments> {
    let a = coefficients(p)?;
    let sc = scalars(w, p)?;
    Ok(moments_from(&a, &sc))
}

/// Gradients of `phi1..phi4` in `O(N^2)`; requires `nu > 8`.
pub fn portfolio_gradients(w: &[f64], p: &GhMstParams) -> Result<MomentGradients> {
    let a = coefficients(p)?;
    let sc = scalars(w, p)?;
    Ok(gradients_from(&a, &sc, p))
}

/// Moments and gradients sharing one `Sigma w` product.
pub fn portfolio_moments_and_gradients(w: &[f64], p: &GhMstParams) -> Result<(PortfolioMoments, MomentGradients)> {
    let a = coefficients(p)?;
    let sc = scalars(w, p)?;
    Ok((moments_from(&a, &sc), gradients_from(&a, &sc, p)))
}

/// Hessians of `phi3` and `phi4`, exactly symmetric, `O(N^2)` assembly.
///
/// The kurtosis Hessian is
/// `12 a41 s^2 gg' + 2 a42 [2s (Sw g' + g w'S) + s^2 S + q gg'] + 4 a43 [2 Sw w'S + q S]`.
pub fn portfolio_hessians(w: &[f64], p: &GhMstParams) -> Result<MomentHessians> {
    let a = coefficients(p)?;
    let sc = scalars(w, p)?;
    let (s, q) = (sc.s, sc.q);
    let n = p.n_assets();
    let g = p.gamma();
    let sw = &sc.sigma_w;
    let sig = p.sigma();
    let h3 = DMatrix::from_fn(n, n, |i, j| {
        6.0 * a.a31 * s * g[i] * g[j] + 2.0 * a.a32 * (g[i] * sw[j] + sw[i] * g[j] + s * sig[(i, j)])
    });
    let h4 = DMatrix::from_fn(n, n, |i, j| {
        12.0 * a.a41 * s * s * g[i] * g[j]
            + 2.0 * a.a42 * (2.0 * s * (sw[i] * g[j] + g[i] * sw[j]) + s * s * sig[(i, j)] + q * g[i] * g[j])
            + 4.0 * a.a43 * (2.0 * sw[i] * sw[j] + q * sig[(i, j)])
    });
    Ok(MomentHessians {
        phi3: symmetrize(h3),
        phi4: symmetrize(h4),
    })
}

fn symmetrize(h: DMatrix<f64>) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(n, n, |i, j| 0.5 * (h[(i, j)] + h[(j, i)]))
}

/// Dense co-moment tensors implied by the parameters (entry-wise formulas).
///
/// Refuses `N > max_n` since co-kurtosis storage grows as `N^4`.
pub fn reconstruct_comoments(p: &GhMstParams, max_n: usize) -> Result<CoMomentTensors> {
    let n = p.n_assets();
    if n > max_n {
        return Err(crate::HopError::Size { n, cap: max_n });
    }
    let a = coefficients(p)?;
    let (mean, cov) = mean_and_covariance(p)?;
    let g = p.gamma();
    let sg = p.sigma();
    let coskew = fill_symmetric3(n, |i, j, k| {
        a.a31 * g[i] * g[j] * g[k] + a.a32 / 3.0 * (g[i] * sg[(j, k)] + g[j] * sg[(i, k)] + g[k] * sg[(i, j)])
    });
    let cokurt = fill_symmetric4(n, |i, j, k, l| {
        let six = sg[(i, j)] * g[k] * g[l]
            + sg[(i, k)] * g[j] * g[l]
            + sg[(i, l)] * g[j] * g[k]
            + sg[(j, k)] * g[i] * g[l]
            + sg[(j, l)] * g[i] * g[k]
            + sg[(k, l)] * g[i] * g[j];
        let three = sg[(i, j)] * sg[(k, l)] + sg[(i, k)] * sg[(j, l)] + sg[(i, l)] * sg[(j, k)];
        a.a41 * g[i] * g[j] * g[k] * g[l] + a.a42 / 6.0 * six + a.a43 / 3.0 * three
    });
    CoMomentTensors::from_parts(mean, cov, coskew, cokurt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::{random_params, random_vec};
    use crate::HopError;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scalar(mu: f64, sigma: f64, gamma: f64, nu: f64) -> GhMstParams {
        GhMstParams::new(vec![mu], DMatrix::from_element(1, 1, sigma), vec![gamma], nu).unwrap()
    }

    #[test]
    fn symmetric_student_t_limit() {
        let p = scalar(0.0, 1.0, 0.0, 10.0);
        let m = portfolio_moments(&[1.0], &p).unwrap();
        assert_eq!(m.phi1, 0.0);
        assert_relative_eq!(m.phi2, 1.25, max_relative = 1e-15);
        assert_eq!(m.phi3, 0.0);
        assert_relative_eq!(m.phi4, 6.25, max_relative = 1e-15);
        assert_relative_eq!(m.phi4 / (m.phi2 * m.phi2), 3.0 + 6.0 / (10.0 - 4.0), max_relative = 1e-14);
    }

    #[test]
    fn mean_covariance_examples() {
        let p = scalar(0.0, 1.0, 1.0, 10.0);
        let (mean, cov) = mean_and_covariance(&p).unwrap();
        assert_relative_eq!(mean[0], 1.25, max_relative = 1e-15);
        assert_relative_eq!(cov[(0, 0)], 1.25 + 200.0 / 384.0, max_relative = 1e-15);
        assert_relative_eq!(cov[(0, 0)], 1.770_833_333_333_333_3, max_relative = 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let q = random_params(&mut rng, 4, 10.0);
        let q0 = GhMstParams::new(q.mu().to_vec(), q.sigma().clone(), vec![0.0; 4], 10.0).unwrap();
        let (mean, cov) = mean_and_covariance(&q0).unwrap();
        assert_eq!(mean, q.mu().to_vec());
        assert_eq!(cov, q.sigma() * 1.25);

        assert!(matches!(mean_and_covariance(&scalar(0.0, 1.0, 1.0, 4.0)), Err(HopError::Domain(_))));
    }

    #[test]
    fn nu_threshold_enforced() {
        let p = scalar(0.0, 1.0, 1.0, 8.0);
        assert!(matches!(portfolio_moments(&[1.0], &p), Err(HopError::Domain(_))));
        assert!(matches!(portfolio_gradients(&[1.0], &p), Err(HopError::Domain(_))));
        assert!(matches!(portfolio_hessians(&[1.0], &p), Err(HopError::Domain(_))));
        assert!(matches!(reconstruct_comoments(&p, 32), Err(HopError::Domain(_))));
    }

    #[test]
    fn zero_skew_kills_third_moment() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = random_params(&mut rng, 6, 12.0);
        let p = GhMstParams::new(q.mu().to_vec(), q.sigma().clone(), vec![0.0; 6], 12.0).unwrap();
        for _ in 0..10 {
            let w = random_vec(&mut rng, 6, 1.0);
            assert_eq!(portfolio_moments(&w, &p).unwrap().phi3, 0.0);
            assert!(portfolio_gradients(&w, &p).unwrap().phi3.iter().all(|&v| v == 0.0));
            assert!(portfolio_hessians(&w, &p).unwrap().phi3.iter().all(|&v| v == 0.0));
        }
        let t = reconstruct_comoments(&p, 32).unwrap();
        assert!(t.coskew().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_weights_zero_kurtosis_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = random_params(&mut rng, 5, 11.0);
        let g = portfolio_gradients(&[0.0; 5], &p).unwrap();
        assert!(g.phi4.iter().all(|&v| v == 0.0));
        assert!(g.phi3.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn jensen_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let nu = 9.0 + 10.0 * rand::Rng::random::<f64>(&mut rng);
            let p = random_params(&mut rng, 5, nu);
            let w = random_vec(&mut rng, 5, 1.0);
            let m = portfolio_moments(&w, &p).unwrap();
            assert!(m.phi2 > 0.0 && m.phi4 > 0.0);
            assert!(m.phi4 >= m.phi2 * m.phi2);
        }
    }

    #[test]
    fn hessians_exactly_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let p = random_params(&mut rng, 7, 10.0);
        let w = random_vec(&mut rng, 7, 1.0);
        let h = portfolio_hessians(&w, &p).unwrap();
        assert_eq!(h.phi3, h.phi3.transpose());
        assert_eq!(h.phi4, h.phi4.transpose());
    }

    #[test]
    fn reconstruct_entry_and_cap() {
        let p = GhMstParams::new(vec![0.0; 2], DMatrix::identity(2, 2), vec![1.0, 0.0], 10.0).unwrap();
        let a = MomentCoefficients::new(10.0).unwrap();
        let t = reconstruct_comoments(&p, 32).unwrap();
        assert_relative_eq!(t.coskew_at(0, 0, 0), a.a31 + a.a32, max_relative = 1e-15);
        assert!(matches!(reconstruct_comoments(&p, 1), Err(HopError::Size { n: 2, cap: 1 })));
    }

    #[test]
    fn dimension_mismatch() {
        let p = scalar(0.0, 1.0, 1.0, 10.0);
        assert!(matches!(portfolio_moments(&[1.0, 2.0], &p), Err(HopError::Dimension { .. })));
    }
}
