//! Projected-gradient fixed-point iteration with two-level acceleration and a
//! monotone backtracking safeguard.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::objective::Objective;
use crate::error::{check_dim, HopError, Result};
use crate::simplex::{project, SimplexPoint};

/// Smallest safeguard step before the line search gives up.
pub const STEP_FLOOR: f64 = 1e-16;

/// `||V||` below `V_GUARD * max(1, ||R||)` skips acceleration.
pub const V_GUARD: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMode {
    Rfpa,
    Pgd,
}

/// How the step of the `G` mapping is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaScaling {
    /// `eta` as configured for every iteration.
    Fixed,
    /// `eta / L` and `eta0 / L`, with `L` a secant estimate of the
    /// gradient's Lipschitz constant at the starting point.
    InverseLipschitz,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub eta: f64,
    pub eta0: f64,
    pub beta: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
    pub mode: SolverMode,
    pub eta_scaling: EtaScaling,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta: 5.0,
            eta0: 5.0,
            beta: 0.5,
            rel_tol: 1e-6,
            max_iter: 10_000,
            mode: SolverMode::Rfpa,
            eta_scaling: EtaScaling::Fixed,
        }
    }
}

impl SolverConfig {
    pub fn pgd() -> Self {
        Self {
            mode: SolverMode::Pgd,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str, v: f64| Err(HopError::config(format!("{what} = {v} is out of range")));
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad("eta", self.eta);
        }
        if !(self.eta0 > 0.0) || !self.eta0.is_finite() {
            return bad("eta0", self.eta0);
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta", self.beta);
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return bad("rel_tol", self.rel_tol);
        }
        if self.max_iter == 0 {
            return Err(HopError::config("max_iter must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIterReached,
}

/// Outcome of one iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub objective: f64,
    pub residual_norm: f64,
    /// `None` when no extrapolation was attempted.
    pub alpha: Option<f64>,
    pub accel_accepted: bool,
    pub backtracks: usize,
    /// Step of the accepted safeguard move, if one was taken.
    pub safeguard_eta: Option<f64>,
    /// `G` evaluations spent in this iteration.
    pub g_evals: usize,
}

/// Full trace of a solve. `objective_trace[0]` is the starting value and
/// entry `k` the value after iteration `k`, so it has `iterations + 1`
/// entries; the per-iteration traces have `iterations`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub schema: String,
    pub w_final: SimplexPoint,
    pub objective_final: f64,
    pub status: SolveStatus,
    pub iterations: usize,
    pub objective_trace: Vec<f64>,
    pub residual_trace: Vec<f64>,
    pub alpha_trace: Vec<Option<f64>>,
    pub accel_accepted: Vec<bool>,
    pub linesearch_backtracks: Vec<usize>,
    /// Cumulative `G` evaluations after each iteration.
    pub g_evals: Vec<usize>,
    pub stationarity: f64,
    pub gradient_norm: f64,
    pub wall_time_secs: f64,
    /// `G` step and safeguard start actually used (after any scaling).
    pub eta_used: f64,
    pub eta0_used: f64,
    pub config: SolverConfig,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn total_g_evals(&self) -> usize {
        self.g_evals.last().copied().unwrap_or(0)
    }

    /// Number of iterations whose objective rose above the previous one.
    pub fn monotone_violations(&self) -> usize {
        self.objective_trace.windows(2).filter(|w| w[1] > w[0]).count()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| HopError::data(e.to_string()))
    }
}

/// Current iterate with its value and gradient.
#[derive(Debug, Clone)]
pub struct IterState {
    pub w: Vec<f64>,
    pub f: f64,
    pub grad: Vec<f64>,
}

impl IterState {
    pub fn at(w: Vec<f64>, obj: &impl Objective) -> Result<Self> {
        let (f, grad) = obj.value_and_gradient(&w)?;
        Ok(Self { w, f, grad })
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn gradient_step(w: &[f64], grad: &[f64], eta: f64) -> Result<Vec<f64>> {
    let y: Vec<f64> = w.iter().zip(grad).map(|(wi, gi)| wi - eta * gi).collect();
    Ok(project(&y)?.into_vec())
}

/// `G(w; eta) = P(w - eta grad f(w))`.
pub fn g_map(w: &[f64], eta: f64, obj: &impl Objective) -> Result<SimplexPoint> {
    check_dim(obj.dim(), w.len())?;
    if eta == 0.0 {
        return project(w);
    }
    let grad = obj.gradient(w)?;
    project(&w.iter().zip(&grad).map(|(wi, gi)| wi - eta * gi).collect::<Vec<_>>())
}

/// `R(w) = G(w; eta) - w`.
pub fn residual(w: &[f64], eta: f64, obj: &impl Objective) -> Result<Vec<f64>> {
    let g = g_map(w, eta, obj)?;
    Ok(g.as_slice().iter().zip(w).map(|(a, b)| a - b).collect())
}

/// `V(w) = G(G(w)) - 2 G(w) + w`, i.e. `R(G(w)) - R(w)`.
pub fn second_difference(w: &[f64], eta: f64, obj: &impl Objective) -> Result<Vec<f64>> {
    let g1 = g_map(w, eta, obj)?;
    let g2 = g_map(g1.as_slice(), eta, obj)?;
    Ok(g2.as_slice().iter().zip(g1.as_slice()).zip(w).map(|((c, b), a)| c - 2.0 * b + a).collect())
}

/// Extrapolation length, or why there is none.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepLength {
    Alpha(f64),
    /// `||R|| = 0` or `||V||` under the guard; take a plain safeguarded step.
    Degenerate,
}

/// `alpha = max(-||R|| / ||V||, b)` with `b = ||R||^2 / <R, V>` when
/// `<R, V> < 0` and `-inf` otherwise.
pub fn step_length(r: &[f64], v: &[f64]) -> StepLength {
    let (nr, nv) = (norm(r), norm(v));
    if nr == 0.0 || !(nv >= V_GUARD * nr.max(1.0)) {
        return StepLength::Degenerate;
    }
    let rv = dot(r, v);
    let b = if rv < 0.0 { nr * nr / rv } else { f64::NEG_INFINITY };
    StepLength::Alpha((-nr / nv).max(b))
}

/// Moves no larger than this in every coordinate are rounding noise.
const STALL_MOVE: f64 = 16.0 * f64::EPSILON;

/// Relative slack on the sufficient-decrease test, a few ulps of `f(w)`.
const ROUNDOFF_SLACK: f64 = 8.0 * f64::EPSILON;

/// Backtracking projected-gradient step from `state`, starting at `eta0`:
/// shrink by `beta` until `f(w+) <= f(w) + g'(w+ - w) + ||w+ - w||^2 / (2 eta')`.
///
/// Near a stationary point both sides agree to rounding error, so the test
/// allows a few ulps of slack; the caller still refuses any increase.
fn safeguard(state: &IterState, obj: &impl Objective, cfg: &SolverConfig) -> Result<(IterState, usize, usize, f64)> {
    let mut eta = cfg.eta0;
    let mut backtracks = 0;
    let mut evals = 0;
    loop {
        let w = gradient_step(&state.w, &state.grad, eta)?;
        evals += 1;
        let d: Vec<f64> = w.iter().zip(&state.w).map(|(a, b)| a - b).collect();
        if d.iter().all(|x| x.abs() <= STALL_MOVE) {
            // the trial move is at the rounding resolution of the iterate
            return Ok((state.clone(), backtracks, evals, eta));
        }
        let (f, grad) = obj.value_and_gradient(&w)?;
        let bound = state.f + dot(&state.grad, &d) + dot(&d, &d) / (2.0 * eta);
        if f <= bound + ROUNDOFF_SLACK * state.f.abs() {
            return Ok((IterState { w, f, grad }, backtracks, evals, eta));
        }
        eta *= cfg.beta;
        backtracks += 1;
        if eta < STEP_FLOOR {
            return Err(HopError::LineSearchExhausted { step: eta, floor: STEP_FLOOR });
        }
    }
}

/// One iteration from `state`, with `G`-step `cfg.eta`. In PGD mode only the
/// safeguarded step is taken. Never returns a point with a larger objective.
pub fn rfpa_step(state: &IterState, obj: &impl Objective, cfg: &SolverConfig) -> Result<(IterState, StepRecord)> {
    let eta = cfg.eta;
    let mut record = StepRecord {
        objective: state.f,
        residual_norm: 0.0,
        alpha: None,
        accel_accepted: false,
        backtracks: 0,
        safeguard_eta: None,
        g_evals: 0,
    };
    let mut next = None;
    if cfg.mode == SolverMode::Rfpa {
        let g1 = gradient_step(&state.w, &state.grad, eta)?;
        record.g_evals += 1;
        let r: Vec<f64> = g1.iter().zip(&state.w).map(|(a, b)| a - b).collect();
        record.residual_norm = norm(&r);
        if record.residual_norm == 0.0 {
            return Ok((state.clone(), record));
        }
        let g1_grad = obj.gradient(&g1)?;
        let g2 = gradient_step(&g1, &g1_grad, eta)?;
        record.g_evals += 1;
        let v: Vec<f64> = g2.iter().zip(&g1).zip(&state.w).map(|((c, b), a)| c - 2.0 * b + a).collect();
        if let StepLength::Alpha(alpha) = step_length(&r, &v) {
            record.alpha = Some(alpha);
            let y: Vec<f64> = state
                .w
                .iter()
                .zip(&r)
                .zip(&v)
                .map(|((wi, ri), vi)| wi - 2.0 * alpha * ri + alpha * alpha * vi)
                .collect();
            let cand = project(&y)?.into_vec();
            let (f, grad) = obj.value_and_gradient(&cand)?;
            if f <= state.f {
                record.accel_accepted = true;
                next = Some(IterState { w: cand, f, grad });
            }
        }
    }
    let next = match next {
        Some(n) => n,
        None => {
            let (n, backtracks, evals, eta_used) = safeguard(state, obj, cfg)?;
            record.backtracks = backtracks;
            record.g_evals += evals;
            record.safeguard_eta = Some(eta_used);
            if cfg.mode == SolverMode::Pgd {
                let r: Vec<f64> = n.w.iter().zip(&state.w).map(|(a, b)| a - b).collect();
                record.residual_norm = norm(&r);
            }
            // the sufficient-decrease test can pass with f(w+) > f(w) by a
            // rounding error; stay put in that case
            if n.f > state.f {
                state.clone()
            } else {
                n
            }
        }
    };
    record.objective = next.f;
    Ok((next, record))
}

/// `min_i g_i - w'g`: the minimum of `(y - w)'grad f(w)` over the simplex,
/// attained at a vertex. Non-negative exactly at stationary points.
pub fn stationarity_certificate(w: &[f64], obj: &impl Objective) -> Result<f64> {
    let g = obj.gradient(w)?;
    Ok(certificate_from(w, &g))
}

pub(crate) fn certificate_from(w: &[f64], g: &[f64]) -> f64 {
    let min = g.iter().copied().fold(f64::INFINITY, f64::min);
    min - dot(w, g)
}

fn converged(prev: &IterState, next: &IterState, tol: f64) -> bool {
    let w_ok = next
        .w
        .iter()
        .zip(&prev.w)
        .all(|(a, b)| (a - b).abs() <= tol * (a.abs() + b.abs()));
    w_ok && (next.f - prev.f).abs() <= tol * (next.f.abs() + prev.f.abs())
}

/// Secant estimate of the gradient's Lipschitz constant along a short
/// projected-gradient move; `None` if the move is degenerate.
fn lipschitz_estimate(state: &IterState, obj: &impl Objective) -> Result<Option<f64>> {
    let gn = norm(&state.grad);
    if gn == 0.0 {
        return Ok(None);
    }
    let y = gradient_step(&state.w, &state.grad, 1e-3 / gn)?;
    let dn = norm(&y.iter().zip(&state.w).map(|(a, b)| a - b).collect::<Vec<_>>());
    if dn == 0.0 {
        return Ok(None);
    }
    let gy = obj.gradient(&y)?;
    let l = norm(&gy.iter().zip(&state.grad).map(|(a, b)| a - b).collect::<Vec<_>>()) / dn;
    Ok((l > 0.0 && l.is_finite()).then_some(l))
}

/// Iterates [`rfpa_step`] from the projection of `w0` until both relative
/// stopping tests pass or `max_iter` is hit.
pub fn solve(w0: &[f64], obj: &impl Objective, cfg: &SolverConfig) -> Result<SolveReport> {
    cfg.validate()?;
    check_dim(obj.dim(), w0.len())?;
    let start = Instant::now();
    let mut state = IterState::at(project(w0)?.into_vec(), obj)?;
    let mut steps = cfg.clone();
    if cfg.eta_scaling == EtaScaling::InverseLipschitz {
        if let Some(l) = lipschitz_estimate(&state, obj)? {
            steps.eta /= l;
            steps.eta0 /= l;
        }
    }
    let mut report = SolveReport {
        schema: crate::SCHEMA.to_string(),
        w_final: SimplexPoint::uniform(1),
        objective_final: state.f,
        status: SolveStatus::MaxIterReached,
        iterations: 0,
        objective_trace: vec![state.f],
        residual_trace: Vec::new(),
        alpha_trace: Vec::new(),
        accel_accepted: Vec::new(),
        linesearch_backtracks: Vec::new(),
        g_evals: Vec::new(),
        stationarity: 0.0,
        gradient_norm: 0.0,
        wall_time_secs: 0.0,
        eta_used: steps.eta,
        eta0_used: steps.eta0,
        config: cfg.clone(),
    };
    let mut total_evals = 0;
    for _ in 0..cfg.max_iter {
        let (next, rec) = rfpa_step(&state, obj, &steps)?;
        total_evals += rec.g_evals;
        report.iterations += 1;
        report.objective_trace.push(rec.objective);
        report.residual_trace.push(rec.residual_norm);
        report.alpha_trace.push(rec.alpha);
        report.accel_accepted.push(rec.accel_accepted);
        report.linesearch_backtracks.push(rec.backtracks);
        report.g_evals.push(total_evals);
        let done = converged(&state, &next, cfg.rel_tol);
        state = next;
        if done {
            report.status = SolveStatus::Converged;
            break;
        }
    }
    report.objective_final = state.f;
    report.stationarity = certificate_from(&state.w, &state.grad);
    report.gradient_norm = norm(&state.grad);
    report.w_final = SimplexPoint::new(state.w)?;
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(report)
}
