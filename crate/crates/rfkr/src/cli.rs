//! The `rfkr` command line. Settings are layered: subcommand preset, then
//! `--config` file, then explicit flags.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use rfkr_core::diagnostics::{diagnose, DiagSettings};
use rfkr_core::estimators::{build_feature_matrix, fit_rfrr, make_labels, RfrrPredictor};
use rfkr_core::orthopoly::activation_coeffs;
use rfkr_core::risk::{closed_form_risk, effective_ridge_risk, kernel_floor, mc_risk, truncation_warning, RiskReport};
use rfkr_core::rng::derive_seed;
use rfkr_core::spectrum::{DEFAULT_DELTAS, LEVEL_GUARD};
use rfkr_core::{
    check_assumptions, effective_gamma, profile, sample_points, select_levels, target_from_masses, theory_risk,
    LevelSelection,
};
use serde::Serialize;

use crate::cache::{self, kernel_coeffs_cached};
use crate::config::{figure1_settings, ExperimentConfig, Settings, DEFAULT_N_TEST};
use crate::error::{HarnessError, Result};
use crate::harness::{run_grid, write_csv, write_outputs};

#[derive(Debug, Parser)]
#[command(name = "rfkr", version, about = "Random features and kernel ridge regression experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Print the activation's Gegenbauer coefficients as JSON.
    Coeffs {
        #[command(flatten)]
        common: Common,
        /// Fixed degree; default truncates at the kernel tail target.
        #[arg(long)]
        kmax: Option<usize>,
    },
    /// Fit RFRR once and report its risks.
    Fit {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        target: TargetArgs,
        #[command(flatten)]
        sizes: Sizes,
    },
    /// Run a grid over log_d n and log_d N.
    Grid(GridArgs),
    /// Grid with the preset staircase experiment (sphere, shifted ReLU, four-level target).
    Figure1(GridArgs),
    /// Run the concentration diagnostics for one (n, N).
    Diagnose {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sizes: Sizes,
    },
    /// Evaluate the spectral assumptions for one (n, N).
    Check {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        sizes: Sizes,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// sphere or hypercube.
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    d: Option<String>,
    /// e.g. shifted_relu:0.5, relu, gegenbauer:2, poly:0,1,0.5.
    #[arg(long)]
    activation: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Output path; standard output when absent.
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    threads: Option<String>,
    /// Directory for cached kernel coefficients.
    #[arg(long)]
    cache: Option<String>,
}

#[derive(Debug, Args)]
struct TargetArgs {
    /// Level masses, e.g. 1:0.4,2:0.4.
    #[arg(long)]
    masses: Option<String>,
    /// Ridge parameter or `zero`.
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long = "n-test")]
    n_test: Option<String>,
    #[arg(long = "sigma-eps")]
    sigma_eps: Option<String>,
    /// Also compute the closed-form risk.
    #[arg(long = "closed-form")]
    closed_form: bool,
    /// Also compute the kernel floor.
    #[arg(long)]
    floor: bool,
}

#[derive(Debug, Args)]
struct Sizes {
    #[arg(long)]
    n: Option<String>,
    #[arg(long = "N")]
    big_n: Option<String>,
}

#[derive(Debug, Args)]
struct GridArgs {
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    target: TargetArgs,
    /// Comma-separated exponents log_d n.
    #[arg(long = "grid-n")]
    grid_n: Option<String>,
    /// Comma-separated exponents log_d N.
    #[arg(long = "grid-N")]
    grid_big_n: Option<String>,
    #[arg(long)]
    reps: Option<String>,
    #[arg(long = "size-cap")]
    size_cap: Option<String>,
    /// Write diagnostics for the first repetition of each cell.
    #[arg(long)]
    diagnostics: bool,
}

fn put(s: &mut Settings, key: &str, v: &Option<String>) -> Result<()> {
    if let Some(v) = v {
        s.set(key, v)?;
    }
    Ok(())
}

fn put_flag(s: &mut Settings, key: &str, v: bool) -> Result<()> {
    if v {
        s.set(key, "true")?;
    }
    Ok(())
}

/// Preset, then config file, then flags.
fn layered(preset: Settings, common: &Common, fill: impl FnOnce(&mut Settings) -> Result<()>) -> Result<Settings> {
    let mut s = preset;
    if let Some(path) = &common.config {
        s.merge(&Settings::from_file(path)?);
    }
    let mut flags = Settings::new();
    put(&mut flags, "domain", &common.domain)?;
    put(&mut flags, "d", &common.d)?;
    put(&mut flags, "activation", &common.activation)?;
    put(&mut flags, "seed", &common.seed)?;
    put(&mut flags, "out", &common.out)?;
    put(&mut flags, "threads", &common.threads)?;
    put(&mut flags, "cache", &common.cache)?;
    fill(&mut flags)?;
    s.merge(&flags);
    Ok(s)
}

fn fill_target(s: &mut Settings, t: &TargetArgs) -> Result<()> {
    put(s, "masses", &t.masses)?;
    put(s, "lambda", &t.lambda)?;
    put(s, "n_test", &t.n_test)?;
    put(s, "sigma_eps", &t.sigma_eps)?;
    put_flag(s, "closed_form", t.closed_form)?;
    put_flag(s, "floor", t.floor)
}

fn fill_sizes(s: &mut Settings, z: &Sizes) -> Result<()> {
    put(s, "n", &z.n)?;
    put(s, "N", &z.big_n)
}

fn sizes_of(s: &Settings) -> Result<(usize, usize)> {
    let n = s.parsed::<usize>("n")?.ok_or_else(|| HarnessError::Usage("missing `n`".into()))?;
    let big_n = s.parsed::<usize>("N")?.ok_or_else(|| HarnessError::Usage("missing `N`".into()))?;
    if n == 0 || big_n == 0 {
        return Err(HarnessError::Usage("n and N must be positive".into()));
    }
    Ok((n, big_n))
}

fn emit(s: &Settings, text: &str) -> Result<()> {
    match s.get("out") {
        Some(p) => std::fs::write(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct FitOutput {
    n: usize,
    #[serde(rename = "N")]
    big_n: usize,
    lambda: f64,
    selection: LevelSelection,
    training_residual: f64,
    relative_training_residual: f64,
    risk: RiskReport,
}

fn cmd_coeffs(s: &Settings, kmax: Option<usize>) -> Result<()> {
    let domain = s.domain()?;
    let act = s.activation()?;
    let c = match kmax {
        Some(k) => activation_coeffs(&domain, &act, k, 1e-10)?,
        None => kernel_coeffs_cached(s.get("cache").map(Path::new), &domain, &act)?,
    };
    eprintln!("degree {} parseval residual {:.3e}", c.kmax, c.parseval_residual());
    emit(s, &cache::to_json(&c)?)
}

fn cmd_fit(s: &Settings) -> Result<()> {
    let start = Instant::now();
    let domain = s.domain()?;
    let act = s.activation()?;
    let (n, big_n) = sizes_of(s)?;
    let seed: u64 = s.parsed_or("seed", 0)?;
    let lambda = s.lambda()?.value();
    let sigma: f64 = s.parsed_or("sigma_eps", 0.0)?;
    let n_test: usize = s.parsed_or("n_test", DEFAULT_N_TEST)?;
    let coeffs = kernel_coeffs_cached(s.get("cache").map(Path::new), &domain, &act)?;
    let target = target_from_masses(&domain, derive_seed(seed, "target", &[]), &s.masses()?)?;
    let sel = select_levels(domain.d, n, big_n, LEVEL_GUARD)?;
    let prof = profile(&coeffs);
    let x = sample_points(&domain, n, derive_seed(seed, "X", &[n as u64, big_n as u64, 0]))?;
    let theta = sample_points(&domain, big_n, derive_seed(seed, "Theta", &[n as u64, big_n as u64, 0]))?;
    let y = make_labels(&x, &target, sigma, derive_seed(seed, "labels", &[n as u64, big_n as u64, 0]))?;
    let z = build_feature_matrix(&domain, &x, &theta, &act)?.z;
    let model = fit_rfrr(&z, &y, lambda)?;
    let resid = (&z * &model.coeffs).iter().zip(&y).map(|(p, t)| (p - t).powi(2)).sum::<f64>().sqrt();
    let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let pred = RfrrPredictor { domain, theta: &theta, act: &act, b: model.coeffs.as_slice() };
    let (mc, se) = mc_risk(&pred, &target, n_test, derive_seed(seed, "test", &[n as u64, big_n as u64, 0]))?;
    let closed = if s.get("closed_form") == Some("true") {
        Some(closed_form_risk(&model, &theta, &target, &coeffs)?)
    } else {
        None
    };
    let floor = if s.get("floor") == Some("true") { Some(kernel_floor(&x, &target, &coeffs)?) } else { None };
    let risk = RiskReport {
        mc_risk: mc,
        mc_se: se,
        closed_form_risk: closed,
        theory_risk: Some(theory_risk(&target, &sel)),
        effective_ridge_risk: Some(effective_ridge_risk(&target, &prof, effective_gamma(&prof, sel.s, lambda), n)),
        floor_risk: floor,
        n_test,
        runtime_ms: start.elapsed().as_millis() as u64,
        warnings: truncation_warning(&coeffs).into_iter().collect(),
    };
    let out = FitOutput {
        n,
        big_n,
        lambda,
        selection: sel,
        training_residual: resid,
        relative_training_residual: if ynorm > 0.0 { resid / ynorm } else { resid },
        risk,
    };
    emit(s, &serde_json::to_string_pretty(&out)?)
}

fn cmd_grid(s: &Settings) -> Result<()> {
    let cfg = ExperimentConfig::from_settings(s)?;
    let outcome = run_grid(&cfg)?;
    match &cfg.out {
        Some(p) => write_outputs(&outcome, p)?,
        None => write_csv(&outcome.rows, std::io::stdout().lock())?,
    }
    eprint!("{outcome}");
    let failed = outcome.failed_reps();
    if failed > 0 {
        return Err(HarnessError::CellsFailed { failed, total: cfg.cells().len() * cfg.reps });
    }
    Ok(())
}

fn cmd_diagnose(s: &Settings) -> Result<()> {
    let domain = s.domain()?;
    let act = s.activation()?;
    let (n, big_n) = sizes_of(s)?;
    let seed: u64 = s.parsed_or("seed", 0)?;
    let coeffs = kernel_coeffs_cached(s.get("cache").map(Path::new), &domain, &act)?;
    let sel = select_levels(domain.d, n, big_n, LEVEL_GUARD)?;
    let x = sample_points(&domain, n, derive_seed(seed, "X", &[n as u64, big_n as u64, 0]))?;
    let theta = sample_points(&domain, big_n, derive_seed(seed, "Theta", &[n as u64, big_n as u64, 0]))?;
    let z = build_feature_matrix(&domain, &x, &theta, &act)?.z;
    let report = diagnose(&x, &theta, &z, &coeffs, sel.s, sel.big_s, &DiagSettings::default(), seed)?;
    emit(s, &serde_json::to_string_pretty(&report)?)
}

fn cmd_check(s: &Settings) -> Result<()> {
    let domain = s.domain()?;
    let act = s.activation()?;
    let (n, big_n) = sizes_of(s)?;
    let coeffs = kernel_coeffs_cached(s.get("cache").map(Path::new), &domain, &act)?;
    let report = check_assumptions(&profile(&coeffs), n, big_n, &DEFAULT_DELTAS)?;
    emit(s, &serde_json::to_string_pretty(&report)?)
}

fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Coeffs { common, kmax } => cmd_coeffs(&layered(Settings::new(), &common, |_| Ok(()))?, kmax),
        Command::Fit { common, target, sizes } => cmd_fit(&layered(Settings::new(), &common, |s| {
            fill_target(s, &target)?;
            fill_sizes(s, &sizes)
        })?),
        Command::Grid(g) => cmd_grid(&grid_settings(Settings::new(), &g)?),
        Command::Figure1(g) => {
            let d = match &g.common.d {
                Some(d) => d.parse().map_err(|_| HarnessError::Usage(format!("invalid value `{d}` for `d`")))?,
                None => 24,
            };
            cmd_grid(&grid_settings(figure1_settings(d), &g)?)
        }
        Command::Diagnose { common, sizes } => cmd_diagnose(&layered(Settings::new(), &common, |s| fill_sizes(s, &sizes))?),
        Command::Check { common, sizes } => cmd_check(&layered(Settings::new(), &common, |s| fill_sizes(s, &sizes))?),
    }
}

fn grid_settings(preset: Settings, g: &GridArgs) -> Result<Settings> {
    layered(preset, &g.common, |s| {
        fill_target(s, &g.target)?;
        put(s, "grid_n", &g.grid_n)?;
        put(s, "grid_N", &g.grid_big_n)?;
        put(s, "reps", &g.reps)?;
        put(s, "size_cap", &g.size_cap)?;
        put_flag(s, "diagnostics", g.diagnostics)
    })
}

/// Parses `args` (program name first) and runs the subcommand. Returns the
/// process exit code: 0 success, 2 usage, 3 numeric failure, 1 i/o.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
