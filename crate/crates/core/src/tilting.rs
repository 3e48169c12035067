//! Tilting a reference portfolio toward better moments in all four
//! directions, via an `l_p`-smoothed max of normalized moment changes plus a
//! deterioration penalty.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, HopError, Result};
use crate::model::{mean_and_covariance, portfolio_moments, portfolio_moments_and_gradients, GhMstParams, PortfolioMoments};
use crate::simplex::SimplexPoint;
use crate::solver::{solve, Objective, SolveReport, SolverConfig};

/// Reference portfolio as written in a spec document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReferencePortfolio {
    /// The string `"uniform"`.
    Named(String),
    Weights(Vec<f64>),
}

impl ReferencePortfolio {
    pub fn resolve(&self, n: usize) -> Result<SimplexPoint> {
        match self {
            ReferencePortfolio::Named(s) if s == "uniform" => Ok(SimplexPoint::uniform(n)),
            ReferencePortfolio::Named(s) => Err(HopError::config(format!("unknown reference portfolio {s:?}"))),
            ReferencePortfolio::Weights(w) => {
                check_dim(n, w.len())?;
                SimplexPoint::new(w.clone())
            }
        }
    }
}

/// Direction weights `d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DirectionWeights {
    Explicit([f64; 4]),
    /// The string `"relative"`: `d_k = |phi_k(w0)|`, so each entry of
    /// `varphi` is a relative change.
    Named(String),
}

impl DirectionWeights {
    pub fn resolve(&self, phi0: &PortfolioMoments) -> Result<[f64; 4]> {
        let d = match self {
            DirectionWeights::Explicit(d) => *d,
            DirectionWeights::Named(s) if s == "relative" => phi0.as_array().map(f64::abs),
            DirectionWeights::Named(s) => return Err(HopError::config(format!("unknown direction weights {s:?}"))),
        };
        if d.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(HopError::config(format!(
                "direction weights must be positive and finite for the smoothed problem, got {d:?}"
            )));
        }
        Ok(d)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetMeasure {
    /// `(w - w0)' Cov[r] (w - w0)`.
    TrackingError,
}

/// A differentiable deterioration measure supplied by the caller.
pub trait Deterioration: Send + Sync {
    fn value_and_gradient(&self, w: &[f64], w0: &[f64]) -> Result<(f64, Vec<f64>)>;
}

fn default_p() -> u32 {
    8
}

fn default_det() -> DetMeasure {
    DetMeasure::TrackingError
}

fn default_w0() -> ReferencePortfolio {
    ReferencePortfolio::Named("uniform".into())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TiltingSpec {
    #[serde(default = "default_w0")]
    pub w0: ReferencePortfolio,
    pub d: DirectionWeights,
    pub lambda: f64,
    /// Even smoothing exponent.
    #[serde(default = "default_p")]
    pub p: u32,
    /// Shift; `None` picks `1 + max |varphi(w_init)|`.
    #[serde(default)]
    pub t: Option<f64>,
    #[serde(default = "default_det")]
    pub det_measure: DetMeasure,
    /// Solve for `p = 2, 4, ...` up to `p`, warm-starting each stage.
    #[serde(default)]
    pub p_ladder: bool,
}

impl TiltingSpec {
    pub fn new(d: DirectionWeights, lambda: f64) -> Self {
        Self {
            w0: default_w0(),
            d,
            lambda,
            p: default_p(),
            t: None,
            det_measure: default_det(),
            p_ladder: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 || !self.p.is_multiple_of(2) {
            return Err(HopError::config(format!("p = {} must be a positive even integer", self.p)));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(HopError::config(format!("lambda = {} must be finite and non-negative", self.lambda)));
        }
        if let Some(t) = self.t {
            if !(t > 0.0) || !t.is_finite() {
                return Err(HopError::config(format!("t = {t} must be positive")));
            }
        }
        Ok(())
    }
}

/// `g_p(w) = ||t 1 + varphi(w)||_p + lambda g_det(w)` for fixed `(t, p)`.
#[derive(Clone)]
pub struct TiltingObjective {
    base: GhMstParams,
    w0: Vec<f64>,
    phi0: PortfolioMoments,
    d: [f64; 4],
    lambda: f64,
    p: u32,
    t: f64,
    cov: DMatrix<f64>,
    custom: Option<Arc<dyn Deterioration>>,
}

impl std::fmt::Debug for TiltingObjective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TiltingObjective")
            .field("w0", &self.w0)
            .field("phi0", &self.phi0)
            .field("d", &self.d)
            .field("lambda", &self.lambda)
            .field("p", &self.p)
            .field("t", &self.t)
            .finish_non_exhaustive()
    }
}

const SIGNS: [f64; 4] = [-1.0, 1.0, -1.0, 1.0];

impl TiltingObjective {
    /// Resolves `w0` and `d` from the spec; `t` defaults to 1 until chosen.
    pub fn new(base: GhMstParams, spec: &TiltingSpec) -> Result<Self> {
        spec.validate()?;
        base.require_nu_above(8.0, "the tilting objective")?;
        let w0 = spec.w0.resolve(base.n_assets())?.into_vec();
        let phi0 = portfolio_moments(&w0, &base)?;
        let d = spec.d.resolve(&phi0)?;
        let (_, cov) = mean_and_covariance(&base)?;
        Ok(Self {
            base,
            w0,
            phi0,
            d,
            lambda: spec.lambda,
            p: spec.p,
            t: spec.t.unwrap_or(1.0),
            cov,
            custom: None,
        })
    }

    /// Replaces tracking error by a caller-supplied measure.
    pub fn with_deterioration(mut self, det: Arc<dyn Deterioration>) -> Self {
        self.custom = Some(det);
        self
    }

    pub fn with_t(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn with_p(mut self, p: u32) -> Self {
        self.p = p;
        self
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn w0(&self) -> &[f64] {
        &self.w0
    }

    pub fn phi0(&self) -> PortfolioMoments {
        self.phi0
    }

    pub fn d(&self) -> [f64; 4] {
        self.d
    }

    pub fn params(&self) -> &GhMstParams {
        &self.base
    }

    fn varphi_from(&self, m: &PortfolioMoments) -> [f64; 4] {
        let (phi, phi0) = (m.as_array(), self.phi0.as_array());
        std::array::from_fn(|k| SIGNS[k] * (phi[k] - phi0[k]) / self.d[k])
    }

    /// Normalized moment changes; all negative when `w` improves every moment.
    pub fn varphi(&self, w: &[f64]) -> Result<[f64; 4]> {
        Ok(self.varphi_from(&portfolio_moments(w, &self.base)?))
    }

    /// `Cov[r] x` in `O(N^2)`.
    fn cov_times(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        (0..n).map(|i| (0..n).map(|j| self.cov[(i, j)] * x[j]).sum()).collect()
    }

    /// Deterioration measure and its gradient.
    pub fn deterioration(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        if let Some(c) = &self.custom {
            return c.value_and_gradient(w, &self.w0);
        }
        let x: Vec<f64> = w.iter().zip(&self.w0).map(|(a, b)| a - b).collect();
        let cx = self.cov_times(&x);
        let v = x.iter().zip(&cx).map(|(a, b)| a * b).sum::<f64>().max(0.0);
        Ok((v, cx.into_iter().map(|c| 2.0 * c).collect()))
    }

    fn shifted(&self, varphi: &[f64; 4]) -> Result<[f64; 4]> {
        let z = varphi.map(|v| self.t + v);
        if let Some(index) = z.iter().position(|&v| !(v > 0.0)) {
            return Err(HopError::ShiftViolation { index, value: z[index] });
        }
        Ok(z)
    }

    /// `||t 1 + varphi(w)||_p` without the penalty.
    pub fn smoothed_max(&self, w: &[f64]) -> Result<f64> {
        let z = self.shifted(&self.varphi(w)?)?;
        Ok(pnorm(&z, self.p))
    }

    /// `g_p(w)`.
    pub fn smoothed_objective(&self, w: &[f64]) -> Result<f64> {
        let z = self.shifted(&self.varphi(w)?)?;
        let det = if self.lambda > 0.0 { self.deterioration(w)?.0 } else { 0.0 };
        Ok(pnorm(&z, self.p) + self.lambda * det)
    }

    /// `grad g_p(w)`.
    pub fn smoothed_gradient(&self, w: &[f64]) -> Result<Vec<f64>> {
        Ok(self.value_and_gradient(w)?.1)
    }
}

/// `||z||_p` for positive `z`, scaled by the largest entry first.
pub fn pnorm(z: &[f64], p: u32) -> f64 {
    let m = z.iter().copied().fold(0.0, f64::max);
    if m == 0.0 {
        return 0.0;
    }
    let s: f64 = z.iter().map(|&v| (v / m).powi(p as i32)).sum();
    m * s.powf(1.0 / p as f64)
}

impl Objective for TiltingObjective {
    fn dim(&self) -> usize {
        self.w0.len()
    }

    fn value(&self, w: &[f64]) -> Result<f64> {
        check_dim(self.dim(), w.len())?;
        self.smoothed_objective(w)
    }

    fn value_and_gradient(&self, w: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_dim(self.dim(), w.len())?;
        let (m, g) = portfolio_moments_and_gradients(w, &self.base)?;
        let z = self.shifted(&self.varphi_from(&m))?;
        let norm = pnorm(&z, self.p);
        let grads = g.as_array();
        let mut out = vec![0.0; w.len()];
        for k in 0..4 {
            let c = (z[k] / norm).powi(self.p as i32 - 1) * SIGNS[k] / self.d[k];
            for (o, v) in out.iter_mut().zip(grads[k]) {
                *o += c * v;
            }
        }
        let mut value = norm;
        if self.lambda > 0.0 {
            let (det, dg) = self.deterioration(w)?;
            value += self.lambda * det;
            for (o, v) in out.iter_mut().zip(dg) {
                *o += self.lambda * v;
            }
        }
        Ok((value, out))
    }
}

/// Post-hoc view of a tilting solution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TiltingReport {
    pub schema: String,
    pub solve: SolveReport,
    pub w0: Vec<f64>,
    pub d: [f64; 4],
    pub t: f64,
    pub p: u32,
    pub t_restarts: usize,
    pub phi0: PortfolioMoments,
    pub phi_final: PortfolioMoments,
    pub varphi_final: [f64; 4],
    /// `min_k -varphi_k(w_final)`: the achieved uniform improvement.
    pub delta: f64,
    /// Whether each target moved the right way (mean up, variance down,
    /// skewness up, kurtosis down), weakly.
    pub improved: [bool; 4],
    pub tracking_error: f64,
}

const MAX_T_RESTARTS: usize = 60;

fn initial_shift(obj: &TiltingObjective, w_init: &[f64]) -> Result<f64> {
    let v = obj.varphi(w_init)?;
    Ok(1.0 + v.iter().fold(0.0f64, |a, b| a.max(b.abs())))
}

/// Runs the solver on `g_p`, doubling `t` and restarting from `w_init`
/// whenever an iterate violates the shift.
pub fn solve_tilting(
    w_init: &[f64],
    obj: &TiltingObjective,
    spec: &TiltingSpec,
    cfg: &SolverConfig,
) -> Result<TiltingReport> {
    check_dim(obj.dim(), w_init.len())?;
    let mut t = match spec.t {
        Some(t) => t,
        None => initial_shift(obj, w_init)?,
    };
    let ladder: Vec<u32> = if spec.p_ladder {
        std::iter::successors(Some(2u32), |&p| (p < spec.p).then(|| (p * 2).min(spec.p))).collect()
    } else {
        vec![spec.p]
    };
    let mut restarts = 0;
    let (report, used) = 'outer: loop {
        let mut start = w_init.to_vec();
        let mut last = None;
        for &p in &ladder {
            let stage = obj.clone().with_t(t).with_p(p);
            match solve(&start, &stage, cfg) {
                Ok(r) => {
                    start = r.w_final.as_slice().to_vec();
                    last = Some((r, stage));
                }
                Err(HopError::ShiftViolation { .. }) if restarts < MAX_T_RESTARTS => {
                    t *= 2.0;
                    restarts += 1;
                    continue 'outer;
                }
                Err(e) => return Err(e),
            }
        }
        break last.expect("ladder has at least one stage");
    };
    let w = report.w_final.as_slice();
    let phi_final = portfolio_moments(w, obj.params())?;
    let varphi_final = used.varphi_from(&phi_final);
    let delta = varphi_final.iter().map(|v| -v).fold(f64::INFINITY, f64::min);
    let (p0, pf) = (obj.phi0.as_array(), phi_final.as_array());
    let improved = std::array::from_fn(|k| SIGNS[k] * (pf[k] - p0[k]) <= 0.0);
    let tracking_error = used.deterioration(w)?.0;
    Ok(TiltingReport {
        schema: crate::SCHEMA.to_string(),
        w0: obj.w0.clone(),
        d: obj.d,
        t,
        p: spec.p,
        t_restarts: restarts,
        phi0: obj.phi0,
        phi_final,
        varphi_final,
        delta,
        improved,
        tracking_error,
        solve: report,
    })
}
