//! Synthetic experiments: parametric vs non-parametric portfolio error, and
//! empirical complexity of the solver.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{HopError, Result};
use crate::fit::{fit, FitConfig};
use crate::model::{sample_returns, GhMstParams};
use crate::nonparam::{estimate_comoments_capped, COMOMENT_CAP};
use crate::par::map_indices;
use crate::simplex::SimplexPoint;
use crate::solver::{crra_lambdas, solve, Lambdas, MvskObjective, SolveReport, SolverConfig, SolverMode};
use crate::synthetic::random_theta;

/// Independent generator for replicate `rep` at size `n`.
pub fn replicate_rng(seed: u64, n: usize, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((n as u64) << 32) | rep as u64);
    rng
}

pub fn median(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        0.5 * (v[m - 1] + v[m])
    }
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(HopError::data("slope fit needs at least two paired points"));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(HopError::data("slope fit needs positive values"));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let k = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / k, ly.iter().sum::<f64>() / k);
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(HopError::data("slope fit needs at least two distinct sizes"));
    }
    Ok(sxy / sxx)
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorExperimentConfig {
    pub n_list: Vec<usize>,
    pub reps: usize,
    /// Observations per asset.
    pub t_per_asset: usize,
    pub lambdas: Lambdas,
    pub solver: SolverConfig,
    pub fit: FitConfig,
}

impl Default for ErrorExperimentConfig {
    fn default() -> Self {
        Self {
            n_list: vec![10, 20],
            reps: 30,
            t_per_asset: 15,
            lambdas: Lambdas::new([1.0; 4]).expect("unit weights are valid"),
            solver: SolverConfig::default(),
            fit: FitConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub n: usize,
    pub rep: usize,
    pub t: usize,
    pub eps_np: f64,
    pub eps_st: f64,
    pub fitted_nu: f64,
    pub true_nu: f64,
    /// All three solves converged and the fit converged.
    pub converged: bool,
}

fn solve_from_uniform(obj: &MvskObjective, cfg: &SolverConfig) -> Result<SolveReport> {
    solve(SimplexPoint::uniform(obj.backend().n_assets()).as_slice(), obj, cfg)
}

/// One replicate: draw `Theta_true`, sample `T = t_per_asset * N` rows,
/// and compare the non-parametric and fitted portfolios against the truth.
pub fn error_replicate(n: usize, rep: usize, seed: u64, cfg: &ErrorExperimentConfig) -> Result<ErrorRecord> {
    if n > COMOMENT_CAP {
        return Err(HopError::Size { n, cap: COMOMENT_CAP });
    }
    let mut rng = replicate_rng(seed, n, rep);
    let truth: GhMstParams = random_theta(&mut rng, n);
    let t = cfg.t_per_asset * n;
    let data = sample_returns(&truth, t, rng.random())?;

    let w_true = solve_from_uniform(&MvskObjective::parametric(cfg.lambdas, truth.clone())?, &cfg.solver)?;
    let tensors = estimate_comoments_capped(&data, COMOMENT_CAP)?;
    let w_np = solve_from_uniform(&MvskObjective::tensor(cfg.lambdas, tensors)?, &cfg.solver)?;
    let fitted = fit(&data, &cfg.fit)?;
    let w_st = solve_from_uniform(&MvskObjective::parametric(cfg.lambdas, fitted.params.clone())?, &cfg.solver)?;

    Ok(ErrorRecord {
        n,
        rep,
        t,
        eps_np: sq_dist(w_np.w_final.as_slice(), w_true.w_final.as_slice()),
        eps_st: sq_dist(w_st.w_final.as_slice(), w_true.w_final.as_slice()),
        fitted_nu: fitted.params.nu(),
        true_nu: truth.nu(),
        converged: w_true.converged() && w_np.converged() && w_st.converged() && fitted.converged,
    })
}

/// All `(N, replicate)` pairs, run in parallel and returned in order.
pub fn run_error_experiment(cfg: &ErrorExperimentConfig, seed: u64) -> Result<Vec<ErrorRecord>> {
    if cfg.reps == 0 || cfg.n_list.is_empty() || cfg.t_per_asset == 0 {
        return Err(HopError::config("error experiment needs sizes, replicates and a positive sample size"));
    }
    let jobs: Vec<(usize, usize)> = cfg.n_list.iter().flat_map(|&n| (0..cfg.reps).map(move |r| (n, r))).collect();
    map_indices(jobs.len(), |j| error_replicate(jobs[j].0, jobs[j].1, seed, cfg)).into_iter().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorSummary {
    pub n: usize,
    pub median_eps_np: f64,
    pub median_eps_st: f64,
    pub reps: usize,
}

pub fn summarize_errors(records: &[ErrorRecord]) -> Vec<ErrorSummary> {
    let mut sizes: Vec<usize> = records.iter().map(|r| r.n).collect();
    sizes.dedup();
    sizes
        .into_iter()
        .map(|n| {
            let rows: Vec<&ErrorRecord> = records.iter().filter(|r| r.n == n).collect();
            ErrorSummary {
                n,
                median_eps_np: median(&rows.iter().map(|r| r.eps_np).collect::<Vec<_>>()),
                median_eps_st: median(&rows.iter().map(|r| r.eps_st).collect::<Vec<_>>()),
                reps: rows.len(),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    pub n_list: Vec<usize>,
    pub reps: usize,
    /// CRRA risk aversion for the moment weights.
    pub xi: f64,
    pub solver: SolverConfig,
    /// Each timing repeats the solve until this much time has passed and
    /// reports the mean, after one untimed warm-up solve.
    pub min_time_secs: f64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            n_list: vec![50, 100, 200, 400],
            reps: 5,
            xi: 10.0,
            solver: SolverConfig::default(),
            min_time_secs: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub n: usize,
    pub rep: usize,
    pub mode: SolverMode,
    pub secs: f64,
    pub secs_per_iter: f64,
    pub iterations: usize,
    pub g_evals: usize,
    pub converged: bool,
    pub objective: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub mode: SolverMode,
    pub n_list: Vec<usize>,
    pub median_secs: Vec<f64>,
    pub slope: f64,
    pub median_secs_per_iter: Vec<f64>,
    /// Slope of the per-iteration cost; separates iteration growth from
    /// the cost of one step.
    pub per_iter_slope: f64,
}

/// Times solves over the size grid, one at a time on the calling thread.
pub fn run_bench(cfg: &BenchConfig, mode: SolverMode, seed: u64) -> Result<(Vec<BenchRecord>, BenchSummary)> {
    if cfg.reps == 0 || cfg.n_list.is_empty() {
        return Err(HopError::config("benchmark needs sizes and replicates"));
    }
    let lambdas = crra_lambdas(cfg.xi)?;
    let solver = SolverConfig { mode, ..cfg.solver.clone() };
    let mut records = Vec::new();
    for &n in &cfg.n_list {
        for rep in 0..cfg.reps {
            let theta = random_theta(&mut replicate_rng(seed, n, rep), n);
            let obj = MvskObjective::parametric(lambdas, theta)?;
            let r = solve_from_uniform(&obj, &solver)?;
            let start = Instant::now();
            let mut runs = 0u32;
            while runs == 0 || start.elapsed().as_secs_f64() < cfg.min_time_secs {
                std::hint::black_box(solve_from_uniform(&obj, &solver)?);
                runs += 1;
            }
            let secs = start.elapsed().as_secs_f64() / f64::from(runs);
            records.push(BenchRecord {
                n,
                rep,
                mode,
                secs,
                secs_per_iter: secs / r.iterations.max(1) as f64,
                iterations: r.iterations,
                g_evals: r.total_g_evals(),
                converged: r.converged(),
                objective: r.objective_final,
            });
        }
    }
    let per_n = |f: fn(&BenchRecord) -> f64| -> Vec<f64> {
        cfg.n_list
            .iter()
            .map(|&n| median(&records.iter().filter(|r| r.n == n).map(f).collect::<Vec<_>>()))
            .collect()
    };
    let median_secs = per_n(|r| r.secs);
    let median_secs_per_iter = per_n(|r| r.secs_per_iter);
    let ns: Vec<f64> = cfg.n_list.iter().map(|&n| n as f64).collect();
    let slope = loglog_slope(&ns, &median_secs)?;
    let per_iter_slope = loglog_slope(&ns, &median_secs_per_iter)?;
    Ok((
        records,
        BenchSummary {
            mode,
            n_list: cfg.n_list.clone(),
            median_secs,
            slope,
            median_secs_per_iter,
            per_iter_slope,
        },
    ))
}
