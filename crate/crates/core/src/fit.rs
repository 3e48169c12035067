//! Maximum-likelihood fitting by expectation-maximization over the normal
//! mean-variance mixture representation `X | W ~ N(mu + W gamma, W Sigma)`,
//! `W ~ InvGamma(nu/2, nu/2)`.
//!
//! The posterior of `W` given an observation is generalized inverse
//! Gaussian, so every E-step quantity is a ratio of Bessel functions.

use std::time::Instant;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{digamma, ln_gamma};

use crate::data::ReturnsMatrix;
use crate::error::{check_dim, HopError, Result};
use crate::model::{log_pdf_from, mahalanobis, GhMstParams};
use crate::par::{map_chunks, ROW_CHUNK};
use crate::special::{bessel_k_ladder, ln_bessel_k_order_derivative};

/// Below this value of `sqrt(chi psi)` the posterior is treated as its
/// inverse-gamma limit.
const GIG_LIMIT: f64 = 1e-8;

/// Absolute slack on the average log-likelihood before a decrease counts.
pub const ASCENT_SLACK: f64 = 1e-10;

const NU0: f64 = 12.0;
const GOLDEN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitInit {
    /// Sample moments with `gamma = 0`, `nu = 12`.
    MomentMatch,
    Provided(GhMstParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub max_iter: usize,
    pub ll_rel_tol: f64,
    pub nu_bounds: [f64; 2],
    pub init: FitInit,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 500,
            ll_rel_tol: 1e-8,
            nu_bounds: [8.0 + 1e-3, 100.0],
            init: FitInit::MomentMatch,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.nu_bounds;
        if !(lo > 0.0 && lo < hi && hi.is_finite()) {
            return Err(HopError::config(format!("nu bounds [{lo}, {hi}] must be ordered, positive and finite")));
        }
        if !(self.ll_rel_tol > 0.0) {
            return Err(HopError::config("ll_rel_tol must be positive"));
        }
        if self.max_iter == 0 {
            return Err(HopError::config("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub schema: String,
    pub params: GhMstParams,
    /// Average log-likelihood at the initial point and after every update.
    pub loglik_trace: Vec<f64>,
    pub nu_trace: Vec<f64>,
    pub converged: bool,
    /// Set when an update lowered the likelihood beyond [`ASCENT_SLACK`];
    /// the run stops and `params` holds the last good iterate.
    pub non_monotone: bool,
    pub iterations: usize,
    pub wall_time_secs: f64,
}

impl FitReport {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace holds the initial value")
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| HopError::data(e.to_string()))
    }
}

/// How [`normalized_loglik`] scales the summed log-likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LoglikScale {
    /// Divide by the number of observations.
    #[default]
    Mean,
    /// Divide by `5 N^2`, matching a test set of that many rows when the
    /// training set has `15 N`.
    FiveNSquared,
}

/// Log-likelihood of `returns` under `params`, scaled per `scale`.
pub fn normalized_loglik(returns: &ReturnsMatrix, params: &GhMstParams, scale: LoglikScale) -> Result<f64> {
    check_dim(params.n_assets(), returns.n_assets())?;
    let parts = map_chunks(returns.n_periods(), ROW_CHUNK, |range| -> Result<f64> {
        range.map(|i| log_pdf_from(mahalanobis(returns.row(i), params), params, true)).sum()
    });
    let total = parts.into_iter().sum::<Result<f64>>()?;
    let n = returns.n_assets() as f64;
    Ok(match scale {
        LoglikScale::Mean => total / returns.n_periods() as f64,
        LoglikScale::FiveNSquared => total / (5.0 * n * n),
    })
}

/// Posterior moments of the mixing variable for one observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingPosterior {
    pub mean: f64,
    pub mean_inv: f64,
    pub mean_log: f64,
}

/// `E[W], E[1/W], E[ln W]` for `W ~ GIG(-a, chi, psi)`.
pub fn gig_moments(a: f64, chi: f64, psi: f64) -> MixingPosterior {
    let z = (chi * psi).sqrt();
    if z < GIG_LIMIT {
        // inverse gamma with shape a and scale chi/2
        return MixingPosterior {
            mean: 0.5 * chi / (a - 1.0),
            mean_inv: 2.0 * a / chi,
            mean_log: (0.5 * chi).ln() - digamma(a),
        };
    }
    let lad = bessel_k_ladder(a, z);
    let s = (chi / psi).sqrt();
    MixingPosterior {
        mean: s * lad.ratio_down,
        mean_inv: lad.ratio_up / s,
        mean_log: s.ln() - ln_bessel_k_order_derivative(a, z),
    }
}

#[derive(Debug, Clone)]
struct EStep {
    loglik: f64,
    mean_w: f64,
    mean_inv: f64,
    mean_log: f64,
    /// `(1/T) sum E[1/W_i] x_i`
    inv_weighted_x: Vec<f64>,
    inv: Vec<f64>,
    w: Vec<f64>,
}

struct Partial {
    loglik: f64,
    w: Vec<f64>,
    inv: Vec<f64>,
    log_sum: f64,
    inv_x: Vec<f64>,
}

fn e_step(x: &ReturnsMatrix, p: &GhMstParams) -> Result<EStep> {
    let n = x.n_assets();
    let a = 0.5 * (p.nu() + n as f64);
    let psi = p.gamma_quad();
    let parts = map_chunks(x.n_periods(), ROW_CHUNK, |range| -> Result<Partial> {
        let mut part = Partial {
            loglik: 0.0,
            w: Vec::with_capacity(range.len()),
            inv: Vec::with_capacity(range.len()),
            log_sum: 0.0,
            inv_x: vec![0.0; n],
        };
        for i in range {
            let row = x.row(i);
            let m = mahalanobis(row, p);
            part.loglik += log_pdf_from(m, p, true)?;
            let post = gig_moments(a, p.nu() + m.q, psi);
            if !(post.mean.is_finite() && post.mean_inv.is_finite() && post.mean_log.is_finite()) {
                return Err(HopError::numerical(format!("E-step failed at row {}", i + 1)));
            }
            part.w.push(post.mean);
            part.inv.push(post.mean_inv);
            part.log_sum += post.mean_log;
            for (acc, v) in part.inv_x.iter_mut().zip(row) {
                *acc += post.mean_inv * v;
            }
        }
        Ok(part)
    });
    let t = x.n_periods() as f64;
    let mut out = EStep {
        loglik: 0.0,
        mean_w: 0.0,
        mean_inv: 0.0,
        mean_log: 0.0,
        inv_weighted_x: vec![0.0; n],
        inv: Vec::with_capacity(x.n_periods()),
        w: Vec::with_capacity(x.n_periods()),
    };
    for part in parts {
        let part = part?;
        out.loglik += part.loglik;
        out.mean_log += part.log_sum;
        for (a, b) in out.inv_weighted_x.iter_mut().zip(&part.inv_x) {
            *a += b;
        }
        out.w.extend(part.w);
        out.inv.extend(part.inv);
    }
    out.mean_w = out.w.iter().sum::<f64>() / t;
    out.mean_inv = out.inv.iter().sum::<f64>() / t;
    out.loglik /= t;
    out.mean_log /= t;
    out.inv_weighted_x.iter_mut().for_each(|v| *v /= t);
    Ok(out)
}

fn column_means(x: &ReturnsMatrix) -> Vec<f64> {
    let n = x.n_assets();
    let mut m = vec![0.0; n];
    for row in x.rows() {
        for (a, b) in m.iter_mut().zip(row) {
            *a += b;
        }
    }
    m.iter_mut().for_each(|v| *v /= x.n_periods() as f64);
    m
}

fn symmetrize(mut s: DMatrix<f64>) -> DMatrix<f64> {
    let n = s.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (s[(i, j)] + s[(j, i)]);
            s[(i, j)] = v;
            s[(j, i)] = v;
        }
    }
    s
}

/// Weighted outer-product sum over rows, reduced in chunk order.
fn weighted_scatter(x: &ReturnsMatrix, weight: &[f64], center: impl Fn(usize, &[f64], &mut [f64]) + Sync) -> DMatrix<f64> {
    let n = x.n_assets();
    let parts = map_chunks(x.n_periods(), ROW_CHUNK, |range| {
        let mut acc = DMatrix::<f64>::zeros(n, n);
        let mut y = vec![0.0; n];
        for i in range {
            center(i, x.row(i), &mut y);
            for a in 0..n {
                let wa = weight[i] * y[a];
                for b in 0..=a {
                    acc[(a, b)] += wa * y[b];
                }
            }
        }
        acc
    });
    let mut s = parts.into_iter().fold(DMatrix::zeros(n, n), |a, b| a + b);
    for a in 0..n {
        for b in 0..a {
            s[(b, a)] = s[(a, b)];
        }
    }
    s / x.n_periods() as f64
}

fn moment_match(x: &ReturnsMatrix) -> Result<GhMstParams> {
    let mean = column_means(x);
    let ones = vec![1.0; x.n_periods()];
    let cov = weighted_scatter(x, &ones, |_, row, y| {
        for ((o, r), m) in y.iter_mut().zip(row).zip(&mean) {
            *o = r - m;
        }
    });
    let n = x.n_assets();
    GhMstParams::new(mean, symmetrize(cov * ((NU0 - 2.0) / NU0)), vec![0.0; n], NU0)
}

/// Maximizes a unimodal function on `[lo, hi]` to width `tol`.
pub fn golden_section_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (lo, hi);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    // compare the interior estimate against the endpoints
    let mid = 0.5 * (a + b);
    [lo, mid, hi].into_iter().max_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap()
}

/// The `nu` part of the expected complete-data log-likelihood, per
/// observation; concave in `nu`.
fn nu_objective(nu: f64, mean_inv: f64, mean_log: f64) -> f64 {
    let h = 0.5 * nu;
    h * h.ln() - ln_gamma(h) - (h + 1.0) * mean_log - h * mean_inv
}

fn m_step(x: &ReturnsMatrix, e: &EStep, cfg: &FitConfig) -> Result<GhMstParams> {
    let xbar = column_means(x);
    let (dbar, ebar) = (e.mean_w, e.mean_inv);
    // joint stationarity in (mu, gamma): xbar - mu = dbar gamma and
    // mean(eta x) - ebar mu = gamma
    let denom = dbar * ebar - 1.0;
    if !(denom > 0.0) {
        return Err(HopError::numerical(format!("degenerate mixing weights (E[W] E[1/W] - 1 = {denom})")));
    }
    let mu: Vec<f64> = xbar.iter().zip(&e.inv_weighted_x).map(|(xb, ex)| (dbar * ex - xb) / denom).collect();
    let gamma: Vec<f64> = xbar.iter().zip(&mu).map(|(xb, m)| (xb - m) / dbar).collect();
    let n = x.n_assets();
    // sum_i eta_i (y_i - gamma/eta_i)(..)' + (delta_i - 1/eta_i) gamma gamma',
    // a sum of PSD terms
    let mut sigma = weighted_scatter(x, &e.inv, |i, row, y| {
        for k in 0..n {
            y[k] = row[k] - mu[k] - gamma[k] / e.inv[i];
        }
    });
    let excess = e.w.iter().zip(&e.inv).map(|(d, h)| d - 1.0 / h).sum::<f64>() / x.n_periods() as f64;
    for a in 0..n {
        for b in 0..n {
            sigma[(a, b)] += excess.max(0.0) * gamma[a] * gamma[b];
        }
    }
    let [lo, hi] = cfg.nu_bounds;
    let nu = golden_section_max(|v| nu_objective(v, ebar, e.mean_log), lo, hi, GOLDEN_TOL);
    GhMstParams::new(mu, symmetrize(sigma), gamma, nu)
}

/// Runs EM from the configured start. Requires `T > N`.
pub fn fit(returns: &ReturnsMatrix, cfg: &FitConfig) -> Result<FitReport> {
    cfg.validate()?;
    let (t, n) = (returns.n_periods(), returns.n_assets());
    if t <= n {
        return Err(HopError::IllPosed(format!("{t} observations cannot identify a {n}x{n} scatter matrix")));
    }
    let start = Instant::now();
    let mut params = match &cfg.init {
        FitInit::MomentMatch => moment_match(returns)?,
        FitInit::Provided(p) => {
            check_dim(n, p.n_assets())?;
            p.clone()
        }
    };
    let [lo, hi] = cfg.nu_bounds;
    if !(lo..=hi).contains(&params.nu()) {
        params = params.with_nu(params.nu().clamp(lo, hi))?;
    }
    let mut e = e_step(returns, &params)?;
    let mut trace = vec![e.loglik];
    let mut nu_trace = vec![params.nu()];
    let mut converged = false;
    let mut non_monotone = false;
    let mut iterations = 0;
    while iterations < cfg.max_iter {
        iterations += 1;
        let next = m_step(returns, &e, cfg)?;
        let e_next = e_step(returns, &next)?;
        let (prev, cur) = (e.loglik, e_next.loglik);
        if cur < prev - ASCENT_SLACK {
            non_monotone = true;
            trace.push(cur);
            nu_trace.push(next.nu());
            break;
        }
        params = next;
        e = e_next;
        trace.push(cur);
        nu_trace.push(params.nu());
        if (cur - prev).abs() <= cfg.ll_rel_tol * prev.abs() {
            converged = true;
            break;
        }
    }
    Ok(FitReport {
        schema: crate::SCHEMA.to_string(),
        params,
        loglik_trace: trace,
        nu_trace,
        converged,
        non_monotone,
        iterations,
        wall_time_secs: start.elapsed().as_secs_f64(),
    })
}

/// One EM update from `params`, exposed for fixed-point checks.
pub fn em_step(returns: &ReturnsMatrix, params: &GhMstParams, cfg: &FitConfig) -> Result<GhMstParams> {
    check_dim(params.n_assets(), returns.n_assets())?;
    m_step(returns, &e_step(returns, params)?, cfg)
}
