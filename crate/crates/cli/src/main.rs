//! `hop`: fit, solve, tilt, sample, and run the synthetic experiments.
//!
//! Exit codes: 0 success, 2 input error, 3 non-convergence, 4 numerical
//! failure.

mod manifest;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use hop_core::data::ReturnsMatrix;
use hop_core::experiments::{run_bench, run_error_experiment, summarize_errors, BenchConfig, ErrorExperimentConfig};
use hop_core::fit::{fit, FitConfig};
use hop_core::model::{sample_rows, GhMstParams, ParamsDocument};
use hop_core::simplex::SimplexPoint;
use hop_core::solver::{crra_lambdas, solve, Lambdas, MvskObjective, SolverConfig, SolverMode};
use hop_core::tilting::{solve_tilting, TiltingObjective, TiltingSpec};
use hop_core::{HopError, Result};

use manifest::RunManifest;

#[derive(Parser, Debug)]
#[command(name = "hop", version, about = "High-order portfolio design under a skew-t model")]
struct Cli {
    /// JSON configuration for the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output path; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit model parameters to a returns CSV by EM.
    Fit {
        /// Returns CSV: header of asset names, optional leading date column.
        data: PathBuf,
        /// Where to write the fit report; defaults to `fit_report.json`
        /// next to `--out`.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Solve the MVSK problem for fitted parameters.
    Solve {
        #[arg(long)]
        params: PathBuf,
        /// CRRA risk aversion; sets the moment weights.
        #[arg(long, conflicts_with = "lambdas")]
        xi: Option<f64>,
        #[arg(long, num_args = 4, value_names = ["L1", "L2", "L3", "L4"])]
        lambdas: Option<Vec<f64>>,
        /// Comma-separated starting weights; uniform by default.
        #[arg(long, value_delimiter = ',')]
        w0: Option<Vec<f64>>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Tilt a reference portfolio toward better moments.
    Tilt {
        #[arg(long)]
        params: PathBuf,
        /// Tilting spec JSON (`w0`, `d`, `lambda`, `p`, ...).
        #[arg(long)]
        spec: PathBuf,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Draw synthetic returns as CSV.
    Sample {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        count: usize,
    },
    /// Parametric vs non-parametric portfolio error on synthetic data.
    ErrorExp {
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
    },
    /// Time solves over a size grid and fit the log-log slope.
    Bench {
        #[arg(long, value_delimiter = ',')]
        n_list: Option<Vec<usize>>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_enum)]
        mode: Option<ModeArg>,
    },
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Rfpa,
    Pgd,
}

impl From<ModeArg> for SolverMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Rfpa => SolverMode::Rfpa,
            ModeArg::Pgd => SolverMode::Pgd,
        }
    }
}

#[derive(Args, Debug, Clone)]
struct SolverFlags {
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    rel_tol: Option<f64>,
}

impl SolverFlags {
    fn apply(&self, mut cfg: SolverConfig) -> Result<SolverConfig> {
        if let Some(m) = self.mode {
            cfg.mode = m.into();
        }
        if let Some(e) = self.eta {
            cfg.eta = e;
        }
        if let Some(m) = self.max_iter {
            cfg.max_iter = m;
        }
        if let Some(t) = self.rel_tol {
            cfg.rel_tol = t;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Outcome {
    Done,
    NotConverged,
    Numerical,
}

fn exit_code(e: &HopError) -> u8 {
    match e {
        HopError::Numerical(_) | HopError::LineSearchExhausted { .. } | HopError::ShiftViolation { .. } => 4,
        _ => 2,
    }
}

#[derive(Serialize)]
struct WithManifest<'a, T: Serialize> {
    #[serde(flatten)]
    report: &'a T,
    manifest: &'a RunManifest,
}

fn to_json<T: Serialize>(report: &T, manifest: &RunManifest) -> Result<String> {
    serde_json::to_string_pretty(&WithManifest { report, manifest }).map_err(|e| HopError::Io(e.to_string()))
}

fn write_or_print(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, format!("{text}\n")).map_err(|e| HopError::Io(format!("{}: {e}", p.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(())
        }
    }
}

fn sidecar(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(suffix);
    path.with_file_name(name)
}

fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>, manifest: &mut RunManifest) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let bytes = manifest.read_input(p)?;
            serde_json::from_slice(&bytes).map_err(|e| HopError::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn load_params(path: &Path, manifest: &mut RunManifest) -> Result<GhMstParams> {
    let bytes = manifest.read_input(path)?;
    let text = String::from_utf8(bytes).map_err(|e| HopError::Data(format!("{}: {e}", path.display())))?;
    GhMstParams::from_json(&text)
}

fn cmd_fit(cli: &Cli, data: &Path, report_path: Option<&Path>) -> Result<Outcome> {
    let mut manifest = RunManifest::start("fit", cli.seed);
    let cfg: FitConfig = load_config(cli.config.as_deref(), &mut manifest)?;
    cfg.validate()?;
    manifest = manifest.with_config(&cfg)?;
    let bytes = manifest.read_input(data)?;
    let returns = ReturnsMatrix::read_csv(bytes.as_slice())?;
    let report = fit(&returns, &cfg)?;
    let manifest = manifest.finish();
    let params_doc = ParamsDocument::from(report.params.clone());
    match cli.out.as_deref() {
        Some(out) => {
            write_or_print(Some(out), &to_json(&params_doc, &manifest)?)?;
            let rp = report_path.map(Path::to_path_buf).unwrap_or_else(|| out.with_file_name("fit_report.json"));
            write_or_print(Some(&rp), &to_json(&report, &manifest)?)?;
        }
        None => {
            if let Some(rp) = report_path {
                write_or_print(Some(rp), &to_json(&report, &manifest)?)?;
            }
            write_or_print(None, &to_json(&params_doc, &manifest)?)?;
        }
    }
    Ok(if report.non_monotone {
        Outcome::Numerical
    } else if report.converged {
        Outcome::Done
    } else {
        Outcome::NotConverged
    })
}

fn resolve_lambdas(xi: Option<f64>, lambdas: Option<&[f64]>) -> Result<Lambdas> {
    match (xi, lambdas) {
        (Some(x), _) => crra_lambdas(x),
        (None, Some(l)) => Lambdas::new([l[0], l[1], l[2], l[3]]),
        (None, None) => Err(HopError::Config("pass either --xi or --lambdas".into())),
    }
}

fn cmd_solve(cli: &Cli, params: &Path, lambdas: Lambdas, w0: Option<&[f64]>, flags: &SolverFlags) -> Result<Outcome> {
    let mut manifest = RunManifest::start("solve", cli.seed);
    let cfg = flags.apply(load_config(cli.config.as_deref(), &mut manifest)?)?;
    manifest = manifest.with_config(&(&cfg, lambdas, w0))?;
    let theta = load_params(params, &mut manifest)?;
    let n = theta.n_assets();
    let start = match w0 {
        Some(w) => SimplexPoint::new(w.to_vec())?,
        None => SimplexPoint::uniform(n),
    };
    let obj = MvskObjective::parametric(lambdas, theta)?;
    let report = solve(start.as_slice(), &obj, &cfg)?;
    write_or_print(cli.out.as_deref(), &to_json(&report, &manifest.finish())?)?;
    Ok(if report.converged() { Outcome::Done } else { Outcome::NotConverged })
}

fn cmd_tilt(cli: &Cli, params: &Path, spec_path: &Path, flags: &SolverFlags) -> Result<Outcome> {
    let mut manifest = RunManifest::start("tilt", cli.seed);
    let cfg = flags.apply(load_config(cli.config.as_deref(), &mut manifest)?)?;
    let spec_bytes = manifest.read_input(spec_path)?;
    let spec: TiltingSpec = serde_json::from_slice(&spec_bytes)
        .map_err(|e| HopError::Config(format!("{}: {e}", spec_path.display())))?;
    manifest = manifest.with_config(&(&cfg, &spec))?;
    let theta = load_params(params, &mut manifest)?;
    let obj = TiltingObjective::new(theta, &spec)?;
    let report = solve_tilting(obj.w0(), &obj, &spec, &cfg)?;
    write_or_print(cli.out.as_deref(), &to_json(&report, &manifest.finish())?)?;
    Ok(if report.solve.converged() { Outcome::Done } else { Outcome::NotConverged })
}

fn cmd_sample(cli: &Cli, params: &Path, count: usize) -> Result<Outcome> {
    let mut manifest = RunManifest::start("sample", cli.seed);
    manifest = manifest.with_config(&count)?;
    let theta = load_params(params, &mut manifest)?;
    let rows = sample_rows(&theta, count, cli.seed)?;
    let names = hop_core::data::default_names(theta.n_assets());
    let mut buf = Vec::new();
    hop_core::data::write_returns_csv(&mut buf, &names, None, &rows)?;
    let text = String::from_utf8(buf).expect("CSV writer emits UTF-8");
    let manifest = manifest.finish();
    write_csv_with_manifest(cli.out.as_deref(), text.trim_end(), &manifest)?;
    Ok(Outcome::Done)
}

/// CSV goes to `--out` with the manifest alongside as `<out>.manifest.json`;
/// without `--out` the CSV goes to stdout and the manifest to stderr.
fn write_csv_with_manifest(out: Option<&Path>, csv: &str, manifest: &RunManifest) -> Result<()> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| HopError::Io(e.to_string()))?;
    write_or_print(out, csv)?;
    match out {
        Some(p) => write_or_print(Some(&sidecar(p, ".manifest.json")), &text),
        None => {
            eprintln!("{text}");
            Ok(())
        }
    }
}

fn write_summary(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => write_or_print(Some(&sidecar(p, ".summary.json")), text),
        None => {
            eprintln!("{text}");
            Ok(())
        }
    }
}

fn cmd_error_exp(cli: &Cli, n_list: Option<&[usize]>, reps: Option<usize>) -> Result<Outcome> {
    let mut manifest = RunManifest::start("error-exp", cli.seed);
    let mut cfg: ErrorExperimentConfig = load_config(cli.config.as_deref(), &mut manifest)?;
    if let Some(n) = n_list {
        cfg.n_list = n.to_vec();
    }
    if let Some(r) = reps {
        cfg.reps = r;
    }
    manifest = manifest.with_config(&cfg)?;
    let records = run_error_experiment(&cfg, cli.seed)?;
    let mut csv = String::from("n,rep,t,eps_np,eps_st,fitted_nu,true_nu,converged");
    for r in &records {
        csv.push_str(&format!(
            "\n{},{},{},{:?},{:?},{:?},{:?},{}",
            r.n, r.rep, r.t, r.eps_np, r.eps_st, r.fitted_nu, r.true_nu, r.converged
        ));
    }
    let manifest = manifest.finish();
    write_or_print(cli.out.as_deref(), &csv)?;
    let summary = serde_json::json!({
        "schema": hop_core::SCHEMA,
        "summary": summarize_errors(&records),
        "manifest": manifest,
    });
    write_summary(cli.out.as_deref(), &serde_json::to_string_pretty(&summary).map_err(|e| HopError::Io(e.to_string()))?)?;
    Ok(Outcome::Done)
}

fn cmd_bench(cli: &Cli, n_list: Option<&[usize]>, reps: Option<usize>, mode: Option<ModeArg>) -> Result<Outcome> {
    let mut manifest = RunManifest::start("bench", cli.seed);
    let mut cfg: BenchConfig = load_config(cli.config.as_deref(), &mut manifest)?;
    if let Some(n) = n_list {
        cfg.n_list = n.to_vec();
    }
    if let Some(r) = reps {
        cfg.reps = r;
    }
    let mode = mode.map_or(cfg.solver.mode, SolverMode::from);
    manifest = manifest.with_config(&(&cfg, mode))?;
    let (records, summary) = run_bench(&cfg, mode, cli.seed)?;
    let mut csv = String::from("n,rep,mode,secs,secs_per_iter,iterations,g_evals,converged,objective");
    for r in &records {
        let m = if r.mode == SolverMode::Rfpa { "rfpa" } else { "pgd" };
        csv.push_str(&format!(
            "\n{},{},{m},{:?},{:?},{},{},{},{:?}",
            r.n, r.rep, r.secs, r.secs_per_iter, r.iterations, r.g_evals, r.converged, r.objective
        ));
    }
    let manifest = manifest.finish();
    write_or_print(cli.out.as_deref(), &csv)?;
    let text = serde_json::to_string_pretty(&serde_json::json!({
        "schema": hop_core::SCHEMA,
        "summary": summary,
        "manifest": manifest,
    }))
    .map_err(|e| HopError::Io(e.to_string()))?;
    write_summary(cli.out.as_deref(), &text)?;
    Ok(Outcome::Done)
}

fn run(cli: &Cli) -> Result<Outcome> {
    match &cli.command {
        Command::Fit { data, report } => cmd_fit(cli, data, report.as_deref()),
        Command::Solve {
            params,
            xi,
            lambdas,
            w0,
            solver,
        } => {
            let l = resolve_lambdas(*xi, lambdas.as_deref())?;
            cmd_solve(cli, params, l, w0.as_deref(), solver)
        }
        Command::Tilt { params, spec, solver } => cmd_tilt(cli, params, spec, solver),
        Command::Sample { params, count } => cmd_sample(cli, params, *count),
        Command::ErrorExp { n_list, reps } => cmd_error_exp(cli, n_list.as_deref(), *reps),
        Command::Bench { n_list, reps, mode } => cmd_bench(cli, n_list.as_deref(), *reps, *mode),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("hop: did not converge within the iteration limit");
            ExitCode::from(3)
        }
        Ok(Outcome::Numerical) => {
            eprintln!("hop: likelihood ascent was violated; run halted");
            ExitCode::from(4)
        }
        Err(e) => {
            eprintln!("hop: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
