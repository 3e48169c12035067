//! Log-density of the skew-t, evaluated entirely in log space.

use nalgebra::DVector;
use statrs::function::gamma::ln_gamma;

use super::params::GhMstParams;
use crate::error::{check_dim, HopError, Result};
use crate::special::ln_bessel_k;

/// Below this `||gamma||` the Bessel form is replaced by its Student-t limit.
pub const SKEW_EPS: f64 = 1e-12;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Per-observation quadratic forms reused by the density and the fit.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Mahalanobis {
    /// `(x - mu)' Sigma^{-1} (x - mu)`
    pub q: f64,
    /// `(x - mu)' Sigma^{-1} gamma`
    pub skew_term: f64,
}

pub(crate) fn mahalanobis(x: &[f64], p: &GhMstParams) -> Mahalanobis {
    let centered = DVector::from_iterator(x.len(), x.iter().zip(p.mu()).map(|(a, b)| a - b));
    let skew_term = centered.iter().zip(p.sigma_inv_gamma()).map(|(a, b)| a * b).sum();
    let mut z = centered;
    p.cholesky().l_dirty().solve_lower_triangular_mut(&mut z);
    Mahalanobis {
        q: z.norm_squared(),
        skew_term,
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Log-density given the precomputed quadratic forms.
pub(crate) fn log_pdf_from(m: Mahalanobis, p: &GhMstParams, fallback: bool) -> Result<f64> {
    let n = p.n_assets() as f64;
    let nu = p.nu();
    let half_order = 0.5 * (nu + n);
    if norm(p.gamma()) < SKEW_EPS {
        if !fallback {
            return Err(HopError::domain(
                "the skew-t density is degenerate at gamma = 0 and the Student-t fallback is disabled",
            ));
        }
        return Ok(ln_gamma(half_order) - ln_gamma(0.5 * nu) - 0.5 * n * (nu * std::f64::consts::PI).ln()
            - 0.5 * p.ln_det_sigma()
            - half_order * (m.q / nu).ln_1p());
    }
    let rho = p.gamma_quad();
    let chi = nu + m.q;
    let arg = (chi * rho).sqrt();
    let ln_k = ln_bessel_k(half_order, arg);
    if !ln_k.is_finite() {
        return Err(HopError::numerical(format!("Bessel evaluation failed at order {half_order}, argument {arg}")));
    }
    Ok(m.skew_term - 0.5 * n * LN_2PI - 0.5 * p.ln_det_sigma()
        + std::f64::consts::LN_2
        + 0.5 * nu * (0.5 * nu).ln()
        - ln_gamma(0.5 * nu)
        - 0.5 * half_order * (chi / rho).ln()
        + ln_k)
}

/// Log-density at `x`, falling back to the multivariate Student-t when
/// `||gamma|| < 1e-12`.
///
/// The normalizing power and the Bessel argument both use `nu + Q(x)`.
pub fn log_pdf(x: &[f64], p: &GhMstParams) -> Result<f64> {
    log_pdf_with(x, p, true)
}

/// As [`log_pdf`], with the zero-skew fallback optional; when disabled a
/// zero `gamma` is a domain error.
pub fn log_pdf_with(x: &[f64], p: &GhMstParams, student_t_fallback: bool) -> Result<f64> {
    check_dim(p.n_assets(), x.len())?;
    if x.iter().any(|v| !v.is_finite()) {
        return Err(HopError::data("non-finite observation"));
    }
    log_pdf_from(mahalanobis(x, p), p, student_t_fallback)
}
