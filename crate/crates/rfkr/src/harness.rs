//! Seeded grid execution over `(n, N, rep)` and the CSV result rows.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use rfkr_core::diagnostics::{diagnose, DiagSettings, DiagnosticsReport};
use rfkr_core::estimators::{build_feature_matrix, fit_rfrr, make_labels, RfrrPredictor};
use rfkr_core::risk::{closed_form_risk, effective_ridge_risk, kernel_floor, mc_risk};
use rfkr_core::rng::derive_seed;
use rfkr_core::spectrum::LEVEL_GUARD;
use rfkr_core::{
    effective_gamma, profile, sample_points, select_levels, target_from_masses, theory_risk, GegenbauerCoeffs,
    SpectrumProfile, TargetFunction,
};
use serde::{Deserialize, Serialize};

use crate::cache::kernel_coeffs_cached;
use crate::config::{size_from_exponent, ExperimentConfig};
use crate::error::{HarnessError, Result};

/// CSV header, in column order.
pub const CSV_COLUMNS: [&str; 21] = [
    "d",
    "n",
    "N",
    "log_d_n",
    "log_d_N",
    "lambda",
    "rep",
    "mc_risk",
    "mc_se",
    "theory_risk",
    "closed_form_risk",
    "effective_ridge_risk",
    "floor_risk",
    "regime",
    "s",
    "S",
    "ambiguous_s",
    "ambiguous_S",
    "ambiguous_regime",
    "runtime_ms",
    "status",
];

/// One CSV line: a single repetition, or the mean over repetitions
/// (`rep = -1`). Failed repetitions carry `NaN` risks and an `error:` status.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub d: usize,
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub log_d_n: f64,
    #[serde(rename = "log_d_N")]
    pub log_d_big_n: f64,
    pub lambda: f64,
    pub rep: i64,
    pub mc_risk: f64,
    pub mc_se: f64,
    pub theory_risk: f64,
    pub closed_form_risk: Option<f64>,
    pub effective_ridge_risk: Option<f64>,
    pub floor_risk: Option<f64>,
    pub regime: String,
    pub s: usize,
    #[serde(rename = "S")]
    pub big_s: usize,
    pub ambiguous_s: bool,
    #[serde(rename = "ambiguous_S")]
    pub ambiguous_big_s: bool,
    pub ambiguous_regime: bool,
    pub runtime_ms: u64,
    pub status: String,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn is_mean(&self) -> bool {
        self.rep < 0
    }

    /// Copy with the timing column zeroed, for determinism comparisons.
    pub fn without_runtime(&self) -> ResultRow {
        ResultRow { runtime_ms: 0, ..self.clone() }
    }
}

/// Read-only state shared by every cell of a grid.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    pub cfg: ExperimentConfig,
    pub coeffs: GegenbauerCoeffs,
    pub profile: SpectrumProfile,
    pub target: TargetFunction,
}

impl ExperimentContext {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let coeffs = kernel_coeffs_cached(cfg.cache_dir.as_deref(), &cfg.domain, &cfg.activation)?;
        let target = target_from_masses(&cfg.domain, derive_seed(cfg.master_seed, "target", &[]), &cfg.masses)?;
        Ok(ExperimentContext { cfg: cfg.clone(), profile: profile(&coeffs), coeffs, target })
    }
}

/// Diagnostics of the first repetition of a cell.
#[derive(Debug, Clone, Serialize)]
pub struct CellDiagnostics {
    pub n: usize,
    #[serde(rename = "N")]
    pub big_n: usize,
    pub log_d_n: f64,
    #[serde(rename = "log_d_N")]
    pub log_d_big_n: f64,
    pub report: DiagnosticsReport,
}

/// Sizes, levels and seeds of one `(cell, rep)` task.
struct CellPlan {
    n: usize,
    big_n: usize,
    rep: u64,
}

fn cell_seed(master: u64, role: &str, plan: &CellPlan) -> u64 {
    derive_seed(master, role, &[plan.n as u64, plan.big_n as u64, plan.rep])
}

/// Fits RFRR on one cell and evaluates the configured risks. Solver failures
/// become a row with an `error:` status.
pub fn run_cell(ctx: &ExperimentContext, log_d_n: f64, log_d_big_n: f64, rep: u64) -> Result<ResultRow> {
    Ok(run_cell_inner(ctx, log_d_n, log_d_big_n, rep, false)?.0)
}

fn run_cell_inner(
    ctx: &ExperimentContext,
    log_d_n: f64,
    log_d_big_n: f64,
    rep: u64,
    with_diagnostics: bool,
) -> Result<(ResultRow, Option<CellDiagnostics>)> {
    let cfg = &ctx.cfg;
    let d = cfg.domain.d;
    let plan = CellPlan { n: size_from_exponent(d, log_d_n), big_n: size_from_exponent(d, log_d_big_n), rep };
    for size in [plan.n, plan.big_n] {
        if size > cfg.size_cap {
            return Err(HarnessError::Usage(format!("cell size {size} exceeds the cap {}", cfg.size_cap)));
        }
    }
    let sel = select_levels(d, plan.n, plan.big_n, LEVEL_GUARD)?;
    let lambda = cfg.lambda.value();
    let mut row = ResultRow {
        d,
        n: plan.n,
        big_n: plan.big_n,
        log_d_n,
        log_d_big_n,
        lambda,
        rep: rep as i64,
        mc_risk: f64::NAN,
        mc_se: f64::NAN,
        theory_risk: theory_risk(&ctx.target, &sel),
        closed_form_risk: None,
        effective_ridge_risk: Some(effective_ridge_risk(
            &ctx.target,
            &ctx.profile,
            effective_gamma(&ctx.profile, sel.s, lambda),
            plan.n,
        )),
        floor_risk: None,
        regime: sel.regime.name().to_string(),
        s: sel.s,
        big_s: sel.big_s,
        ambiguous_s: sel.ambiguous_s,
        ambiguous_big_s: sel.ambiguous_big_s,
        ambiguous_regime: sel.ambiguous_regime,
        runtime_ms: 0,
        status: "ok".into(),
    };
    let start = Instant::now();
    let mut diag = None;
    let outcome = (|| -> rfkr_core::Result<()> {
        let x = sample_points(&cfg.domain, plan.n, cell_seed(cfg.master_seed, "X", &plan))?;
        let theta = sample_points(&cfg.domain, plan.big_n, cell_seed(cfg.master_seed, "Theta", &plan))?;
        let y = make_labels(&x, &ctx.target, cfg.sigma_eps, cell_seed(cfg.master_seed, "labels", &plan))?;
        let z = build_feature_matrix(&cfg.domain, &x, &theta, &cfg.activation)?.z;
        let model = fit_rfrr(&z, &y, lambda)?;
        let pred = RfrrPredictor {
            domain: cfg.domain,
            theta: &theta,
            act: &cfg.activation,
            b: model.coeffs.as_slice(),
        };
        let (r, se) = mc_risk(&pred, &ctx.target, cfg.n_test, cell_seed(cfg.master_seed, "test", &plan))?;
        row.mc_risk = r;
        row.mc_se = se;
        if cfg.run_closed_form {
            row.closed_form_risk = Some(closed_form_risk(&model, &theta, &ctx.target, &ctx.coeffs)?);
        }
        if cfg.run_floor {
            row.floor_risk = Some(kernel_floor(&x, &ctx.target, &ctx.coeffs)?);
        }
        if with_diagnostics {
            let report = diagnose(
                &x,
                &theta,
                &z,
                &ctx.coeffs,
                sel.s,
                sel.big_s,
                &DiagSettings::default(),
                cell_seed(cfg.master_seed, "diagnostics", &plan),
            )?;
            diag = Some(CellDiagnostics { n: plan.n, big_n: plan.big_n, log_d_n, log_d_big_n, report });
        }
        Ok(())
    })();
    row.runtime_ms = start.elapsed().as_millis() as u64;
    if let Err(e) = outcome {
        row.mc_risk = f64::NAN;
        row.mc_se = f64::NAN;
        row.status = format!("error: {e}");
    }
    Ok((row, diag))
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let v: Vec<f64> = values.collect();
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Mean row over the repetitions of one cell. The standard error is the
/// spread across repetitions when there are at least two successful ones.
pub fn mean_row(reps: &[ResultRow]) -> ResultRow {
    let first = &reps[0];
    let ok: Vec<&ResultRow> = reps.iter().filter(|r| r.is_ok()).collect();
    let k = ok.len();
    let mc_risk = mean_of(ok.iter().map(|r| r.mc_risk)).unwrap_or(f64::NAN);
    let mc_se = match k {
        0 => f64::NAN,
        1 => ok[0].mc_se,
        _ => {
            let var = ok.iter().map(|r| (r.mc_risk - mc_risk).powi(2)).sum::<f64>() / (k - 1) as f64;
            (var / k as f64).sqrt()
        }
    };
    let opt_mean = |f: fn(&ResultRow) -> Option<f64>| {
        if ok.iter().all(|r| f(r).is_some()) {
            mean_of(ok.iter().filter_map(|r| f(r)))
        } else {
            None
        }
    };
    ResultRow {
        rep: -1,
        mc_risk,
        mc_se,
        closed_form_risk: opt_mean(|r| r.closed_form_risk),
        effective_ridge_risk: opt_mean(|r| r.effective_ridge_risk),
        floor_risk: opt_mean(|r| r.floor_risk),
        runtime_ms: reps.iter().map(|r| r.runtime_ms).sum(),
        status: if k == reps.len() { "ok".into() } else { format!("failed {}/{}", reps.len() - k, reps.len()) },
        ..first.clone()
    }
}

/// Per-cell line of the grid summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub log_d_n: f64,
    pub log_d_big_n: f64,
    pub n: usize,
    pub big_n: usize,
    pub mean_risk: f64,
    pub mean_se: f64,
    pub theory_risk: f64,
    pub failed_reps: usize,
}

/// Everything a grid run produces.
#[derive(Debug, Clone)]
pub struct GridOutcome {
    /// Cell-major, rep-minor, each cell closed by its mean row.
    pub rows: Vec<ResultRow>,
    pub cells: Vec<CellSummary>,
    pub diagnostics: Vec<CellDiagnostics>,
}

impl GridOutcome {
    pub fn failed_reps(&self) -> usize {
        self.cells.iter().map(|c| c.failed_reps).sum()
    }

    pub fn mean_rows(&self) -> impl Iterator<Item = &ResultRow> {
        self.rows.iter().filter(|r| r.is_mean())
    }

    /// Mean row of the cell with the given exponents.
    pub fn mean_at(&self, log_d_n: f64, log_d_big_n: f64) -> Option<&ResultRow> {
        self.mean_rows().find(|r| r.log_d_n == log_d_n && r.log_d_big_n == log_d_big_n)
    }
}

impl fmt::Display for GridOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:>8} {:>8} {:>7} {:>7} {:>10} {:>9} {:>7} {:>6}", "log_d_n", "log_d_N", "n", "N", "risk", "se", "theory", "failed")?;
        for c in &self.cells {
            writeln!(
                f,
                "{:>8.3} {:>8.3} {:>7} {:>7} {:>10.4} {:>9.2e} {:>7.3} {:>6}",
                c.log_d_n, c.log_d_big_n, c.n, c.big_n, c.mean_risk, c.mean_se, c.theory_risk, c.failed_reps
            )?;
        }
        Ok(())
    }
}

/// Runs every `(cell, rep)` on a worker pool (`cfg.threads` workers, or the
/// rayon default) and gathers rows in deterministic order.
pub fn run_grid(cfg: &ExperimentConfig) -> Result<GridOutcome> {
    let ctx = ExperimentContext::new(cfg)?;
    let cells = cfg.cells();
    let tasks: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (0..cfg.reps as u64).map(move |r| (c, r))).collect();
    let run = || -> Result<Vec<(ResultRow, Option<CellDiagnostics>)>> {
        tasks
            .par_iter()
            .map(|&(c, r)| run_cell_inner(&ctx, cells[c].0, cells[c].1, r, cfg.run_diagnostics && r == 0))
            .collect()
    };
    let results = match cfg.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| HarnessError::Usage(format!("thread pool: {e}")))?
            .install(run)?,
        None => run()?,
    };
    let mut rows = Vec::with_capacity(tasks.len() + cells.len());
    let mut summaries = Vec::with_capacity(cells.len());
    let mut diagnostics = Vec::new();
    for chunk in results.chunks(cfg.reps) {
        let reps: Vec<ResultRow> = chunk.iter().map(|(r, _)| r.clone()).collect();
        diagnostics.extend(chunk.iter().filter_map(|(_, d)| d.clone()));
        let mean = mean_row(&reps);
        summaries.push(CellSummary {
            log_d_n: mean.log_d_n,
            log_d_big_n: mean.log_d_big_n,
            n: mean.n,
            big_n: mean.big_n,
            mean_risk: mean.mc_risk,
            mean_se: mean.mc_se,
            theory_risk: mean.theory_risk,
            failed_reps: reps.iter().filter(|r| !r.is_ok()).count(),
        });
        rows.extend(reps);
        rows.push(mean);
    }
    Ok(GridOutcome { rows, cells: summaries, diagnostics })
}

pub fn write_csv<W: Write>(rows: &[ResultRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    if rows.is_empty() {
        w.write_record(CSV_COLUMNS)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(rows: &[ResultRow], path: &Path) -> Result<()> {
    write_csv(rows, std::fs::File::create(path)?)
}

pub fn read_csv(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        return Err(HarnessError::Usage(format!("unexpected CSV header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

/// Writes the CSV and, when present, the diagnostics as JSON next to it
/// (`<stem>.diagnostics.json`).
pub fn write_outputs(outcome: &GridOutcome, path: &Path) -> Result<()> {
    write_csv_file(&outcome.rows, path)?;
    if !outcome.diagnostics.is_empty() {
        let diag_path = path.with_extension("diagnostics.json");
        std::fs::write(diag_path, serde_json::to_string_pretty(&outcome.diagnostics)?)?;
    }
    Ok(())
}
