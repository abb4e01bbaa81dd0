//! Sweeps over step policies and metrics, with CSV traces and a run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use sfista_core::problems::pgm::{write_pgm, PgmEncoding};
use sfista_core::solver::{run, IterationRecord, RunOutput};
use sfista_core::ImageGrid;

use crate::bundle::{build_problem, DeblurBundle};
use crate::config::{ensure_writable, resolve, ExperimentConfig, RunPoint};
use crate::error::{io_err, CliResult};
use crate::reference::{compute_reference, Reference, ReferenceSettings};

/// Relative errors in `[-REL_ERROR_CLAMP, 0)` are attributed to the residual
/// suboptimality of the reference and reported as 0.
pub const REL_ERROR_CLAMP: f64 = 1e-12;

pub const CSV_HEADER: [&str; 12] = [
    "k",
    "F",
    "rel_error",
    "tau",
    "L_k",
    "Lbar_k",
    "backtracks",
    "inner_iters",
    "epsilon",
    "gap",
    "converged",
    "elapsed_s",
];

/// Solver trace with the relative objective error of every iterate.
#[derive(Clone, Debug)]
pub struct ConvergenceTrace {
    pub point: RunPoint,
    pub records: Vec<IterationRecord>,
    pub rel_error: Vec<f64>,
    /// Entries clamped from tiny negatives to 0.
    pub clamped: usize,
    /// Entries below `-REL_ERROR_CLAMP`, left as they are.
    pub below_reference: usize,
}

impl ConvergenceTrace {
    pub fn new(point: RunPoint, records: Vec<IterationRecord>, reference_objective: f64) -> Self {
        let mut clamped = 0;
        let mut below_reference = 0;
        let rel_error = records
            .iter()
            .map(|r| {
                let e = (r.objective - reference_objective) / reference_objective;
                if e < -REL_ERROR_CLAMP {
                    below_reference += 1;
                    e
                } else if e < 0.0 {
                    clamped += 1;
                    0.0
                } else {
                    e
                }
            })
            .collect();
        Self {
            point,
            records,
            rel_error,
            clamped,
            below_reference,
        }
    }

    pub fn final_rel_error(&self) -> Option<f64> {
        self.rel_error.last().copied()
    }

    /// Writes one row per iteration; floats use the shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(CSV_HEADER)?;
        for (r, e) in self.records.iter().zip(&self.rel_error) {
            w.write_record([
                r.k.to_string(),
                r.objective.to_string(),
                e.to_string(),
                r.tau.to_string(),
                r.l_estimate.to_string(),
                r.l_average.to_string(),
                r.backtracks.to_string(),
                r.inner_iters.to_string(),
                r.epsilon.to_string(),
                r.gap.to_string(),
                r.prox_converged.to_string(),
                r.elapsed_s.to_string(),
            ])?;
        }
        w.flush().map_err(io_err(path))?;
        Ok(())
    }
}

/// Outcome of one sweep point.
#[derive(Clone, Debug)]
pub struct RunReport {
    pub point: RunPoint,
    pub csv: PathBuf,
    pub result: Result<(ConvergenceTrace, ImageGrid), String>,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub bundle: DeblurBundle,
    pub reference: Reference,
    pub runs: Vec<RunReport>,
    pub manifest: PathBuf,
}

impl ExperimentReport {
    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.result.is_err()).count()
    }
}

#[derive(Serialize)]
struct Manifest {
    runs: usize,
    failed: usize,
    reference_objective: f64,
    reference_iterations: usize,
    run: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct ManifestEntry {
    label: String,
    delta: f64,
    s1: f64,
    s2: f64,
    csv: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    final_rel_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_error_clamped: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_error_below_reference: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    elapsed_s: Option<f64>,
}

/// Where relative paths of a config resolve, and optional run-time overrides.
#[derive(Clone, Debug, Default)]
pub struct RunContext {
    pub root: PathBuf,
    pub time_budget: Option<Duration>,
}

impl ExperimentConfig {
    pub fn reference_settings(&self) -> ReferenceSettings {
        ReferenceSettings {
            iterations: self.reference.iterations,
            tau0: self.reference.l0.map_or_else(|| self.tau0(), |l| 1.0 / l),
            max_inner: self.solver.max_inner,
            // Long monotone runs from a loose L0 need more room than the sweep runs.
            max_backtracks: self.solver.max_backtracks.max(60),
        }
    }
}

/// Builds the problem and fetches (or computes) its reference solution.
pub fn prepare(cfg: &ExperimentConfig, ctx: &RunContext) -> CliResult<(DeblurBundle, Reference)> {
    let bundle = build_problem(&cfg.problem, &ctx.root)?;
    let cache_dir = resolve(&ctx.root, &cfg.reference.cache_dir);
    ensure_writable(&cache_dir)?;
    let reference = compute_reference(&bundle.problem, bundle.x0(), &cfg.reference_settings(), Some(&cache_dir))?;
    Ok((bundle, reference))
}

fn run_point(
    cfg: &ExperimentConfig,
    ctx: &RunContext,
    bundle: &DeblurBundle,
    point: RunPoint,
) -> sfista_core::Result<RunOutput> {
    let mut solver = cfg.solver_config(point)?;
    solver.time_budget = ctx.time_budget;
    run(&bundle.problem, &solver, bundle.x0())
}

/// Runs `points` in parallel and writes one CSV per run plus `manifest.toml`.
/// A failing run is recorded in the manifest and does not stop the others.
pub fn run_points(cfg: &ExperimentConfig, ctx: &RunContext, points: &[RunPoint]) -> CliResult<ExperimentReport> {
    let (bundle, reference) = prepare(cfg, ctx)?;
    let out_dir = resolve(&ctx.root, &cfg.output.dir);
    ensure_writable(&out_dir)?;

    let runs: Vec<RunReport> = points
        .par_iter()
        .map(|&point| {
            let csv = out_dir.join(format!("{}_{}.csv", cfg.output.trace_prefix, point.label()));
            let result = run_point(cfg, ctx, &bundle, point)
                .map_err(|e| e.to_string())
                .and_then(|out| {
                    let trace = ConvergenceTrace::new(point, out.trace, reference.objective);
                    trace.write_csv(&csv).map_err(|e| e.to_string())?;
                    Ok((trace, out.x))
                });
            match &result {
                Ok((trace, _)) => info!("{}: final rel_error {:e}", point.label(), trace.final_rel_error().unwrap_or(f64::NAN)),
                Err(e) => warn!("{}: failed: {e}", point.label()),
            }
            RunReport { point, csv, result }
        })
        .collect();

    if cfg.output.images {
        emit_images(&bundle, &runs, &out_dir)?;
    }
    let manifest = out_dir.join("manifest.toml");
    write_manifest(&manifest, cfg, &reference, &runs)?;
    Ok(ExperimentReport {
        bundle,
        reference,
        runs,
        manifest,
    })
}

/// Every point of the sweep block.
pub fn run_experiment(cfg: &ExperimentConfig, ctx: &RunContext) -> CliResult<ExperimentReport> {
    run_points(cfg, ctx, &cfg.sweep_points())
}

fn write_manifest(path: &Path, cfg: &ExperimentConfig, reference: &Reference, runs: &[RunReport]) -> CliResult<()> {
    let entries = runs
        .iter()
        .map(|r| {
            let csv = r.csv.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            let mut entry = ManifestEntry {
                label: r.point.label(),
                delta: r.point.delta,
                s1: r.point.s1,
                s2: r.point.s2,
                csv,
                status: "ok".into(),
                iterations: None,
                final_rel_error: None,
                rel_error_clamped: None,
                rel_error_below_reference: None,
                elapsed_s: None,
            };
            match &r.result {
                Ok((trace, _)) => {
                    entry.iterations = Some(trace.records.len());
                    entry.final_rel_error = trace.final_rel_error();
                    entry.rel_error_clamped = Some(trace.clamped);
                    entry.rel_error_below_reference = Some(trace.below_reference);
                    entry.elapsed_s = trace.records.last().map(|l| l.elapsed_s);
                }
                Err(e) => entry.status = format!("failed: {e}"),
            }
            entry
        })
        .collect();
    let manifest = Manifest {
        runs: runs.len(),
        failed: runs.iter().filter(|r| r.result.is_err()).count(),
        reference_objective: reference.objective,
        reference_iterations: cfg.reference.iterations,
        run: entries,
    };
    let text = toml::to_string(&manifest).expect("manifest serializes");
    fs::write(path, text).map_err(io_err(path))
}

/// Writes the clean scene, the observation and every restored image as
/// 16-bit PGMs with scale sidecars.
pub fn emit_images(bundle: &DeblurBundle, runs: &[RunReport], out_dir: &Path) -> CliResult<()> {
    let put = |name: String, img: &ImageGrid| -> CliResult<()> {
        Ok(write_pgm(&out_dir.join(name), img, PgmEncoding::Binary, u16::MAX)?)
    };
    put("clean.pgm".into(), &bundle.clean)?;
    put("observed.pgm".into(), &bundle.observed)?;
    for r in runs {
        if let Ok((_, x)) = &r.result {
            put(format!("restored_{}.pgm", r.point.label()), x)?;
        }
    }
    Ok(())
}
