//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! [problem]
//! lambda = 0.004            # required
//! rows = 64                 # synthetic phantom size
//! cols = 64
//! peak = 878.0              # phantom rescaled to [low, peak]
//! low = 1.0
//! sigma_psf = 1.4
//! background = 10.0
//! seed = 1
//! # image = "scene.pgm"     # use a PGM instead of the phantom
//!
//! [solver]
//! L0 = 0.1                  # tau0 = 1 / L0; give tau0 instead or both consistently
//! delta = 1.0
//! scaling = [0.0, 0.0]      # (s1, s2); s1 = 0 disables the metric
//! rho = 0.85
//! t0 = 1.0
//! max_outer = 200
//! max_backtracks = 10
//! max_inner = 500
//!
//! [sweep]
//! delta = [1.0, 0.98]
//! scaling = [[0.0, 0.0], [1e10, 3.0]]
//!
//! [output]
//! dir = "out"
//! trace_prefix = "trace"
//! images = true
//!
//! [reference]
//! # L0 = 0.1               # defaults to solver.L0
//! iterations = 5000
//! cache_dir = "cache"
//! ```
//!
//! Relative paths are resolved against `$SFISTA_OUTPUT_ROOT` when it is set
//! and against the directory holding the config file otherwise.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sfista_core::metrics::GammaSchedule;
use sfista_core::solver::SolverConfig;

use crate::error::{io_err, CliError, CliResult};

pub const OUTPUT_ROOT_ENV: &str = "SFISTA_OUTPUT_ROOT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSpec {
    pub lambda: f64,
    #[serde(default = "defaults::side")]
    pub rows: usize,
    #[serde(default = "defaults::side")]
    pub cols: usize,
    #[serde(default = "defaults::peak")]
    pub peak: f64,
    #[serde(default = "defaults::low")]
    pub low: f64,
    #[serde(default = "defaults::sigma_psf")]
    pub sigma_psf: f64,
    #[serde(default = "defaults::background")]
    pub background: f64,
    #[serde(default = "defaults::seed")]
    pub seed: u64,
    #[serde(default)]
    pub image: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    #[serde(rename = "L0", default)]
    pub l0: Option<f64>,
    #[serde(default)]
    pub tau0: Option<f64>,
    #[serde(default = "defaults::delta")]
    pub delta: f64,
    #[serde(default = "defaults::scaling")]
    pub scaling: (f64, f64),
    #[serde(default = "defaults::rho")]
    pub rho: f64,
    #[serde(default = "defaults::t0")]
    pub t0: f64,
    #[serde(default = "defaults::max_outer")]
    pub max_outer: usize,
    #[serde(default = "defaults::max_backtracks")]
    pub max_backtracks: usize,
    #[serde(default = "defaults::max_inner")]
    pub max_inner: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub delta: Vec<f64>,
    #[serde(default)]
    pub scaling: Vec<(f64, f64)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "defaults::out_dir")]
    pub dir: PathBuf,
    #[serde(default = "defaults::trace_prefix")]
    pub trace_prefix: String,
    #[serde(default = "defaults::yes")]
    pub images: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSpec {
    /// Starting Lipschitz guess of the reference run; defaults to the solver's.
    #[serde(rename = "L0", default)]
    pub l0: Option<f64>,
    #[serde(default = "defaults::ref_iterations")]
    pub iterations: usize,
    #[serde(default = "defaults::cache_dir")]
    pub cache_dir: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub solver: SolverSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub reference: ReferenceSpec,
}

mod defaults {
    use std::path::PathBuf;

    pub fn side() -> usize {
        64
    }
    pub fn peak() -> f64 {
        878.0
    }
    pub fn low() -> f64 {
        1.0
    }
    pub fn sigma_psf() -> f64 {
        1.4
    }
    pub fn background() -> f64 {
        10.0
    }
    pub fn seed() -> u64 {
        1
    }
    pub fn delta() -> f64 {
        1.0
    }
    pub fn scaling() -> (f64, f64) {
        (0.0, 0.0)
    }
    pub fn rho() -> f64 {
        0.85
    }
    pub fn t0() -> f64 {
        1.0
    }
    pub fn max_outer() -> usize {
        200
    }
    pub fn max_backtracks() -> usize {
        10
    }
    pub fn max_inner() -> usize {
        500
    }
    pub fn out_dir() -> PathBuf {
        "out".into()
    }
    pub fn trace_prefix() -> String {
        "trace".into()
    }
    pub fn yes() -> bool {
        true
    }
    pub fn ref_iterations() -> usize {
        5000
    }
    pub fn cache_dir() -> PathBuf {
        "cache".into()
    }
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: defaults::out_dir(),
            trace_prefix: defaults::trace_prefix(),
            images: true,
        }
    }
}

impl Default for ReferenceSpec {
    fn default() -> Self {
        Self {
            l0: None,
            iterations: defaults::ref_iterations(),
            cache_dir: defaults::cache_dir(),
        }
    }
}

/// One point of a sweep: step policy and metric thresholds.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunPoint {
    pub delta: f64,
    pub s1: f64,
    pub s2: f64,
}

impl RunPoint {
    pub fn is_scaled(&self) -> bool {
        self.s1 > 0.0
    }

    /// File-name friendly label, e.g. `d0.98_s1e10_s3`.
    pub fn label(&self) -> String {
        if self.is_scaled() {
            format!("d{}_s{:e}_s{}", self.delta, self.s1, self.s2)
        } else {
            format!("d{}_noscale", self.delta)
        }
    }
}

impl ExperimentConfig {
    pub fn parse(text: &str, origin: &Path) -> CliResult<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config {
            path: origin.to_path_buf(),
            message: e.to_string(),
        })?;
        cfg.validate().map_err(|message| CliError::Config {
            path: origin.to_path_buf(),
            message,
        })?;
        Ok(cfg)
    }

    /// `tau0 = 1 / L0`, from whichever of the two is given.
    pub fn tau0(&self) -> f64 {
        match (self.solver.tau0, self.solver.l0) {
            (Some(t), _) => t,
            (None, Some(l)) => 1.0 / l,
            (None, None) => unreachable!("validated"),
        }
    }

    /// Sweep points; an empty list in the sweep block falls back to the solver block.
    pub fn sweep_points(&self) -> Vec<RunPoint> {
        let deltas = if self.sweep.delta.is_empty() {
            vec![self.solver.delta]
        } else {
            self.sweep.delta.clone()
        };
        let scalings = if self.sweep.scaling.is_empty() {
            vec![self.solver.scaling]
        } else {
            self.sweep.scaling.clone()
        };
        deltas
            .iter()
            .flat_map(|&delta| scalings.iter().map(move |&(s1, s2)| RunPoint { delta, s1, s2 }))
            .collect()
    }

    pub fn single_point(&self) -> RunPoint {
        RunPoint {
            delta: self.solver.delta,
            s1: self.solver.scaling.0,
            s2: self.solver.scaling.1,
        }
    }

    pub fn solver_config(&self, point: RunPoint) -> sfista_core::Result<SolverConfig> {
        let mut cfg = SolverConfig::new(point.delta, self.tau0())?;
        cfg.rho = self.solver.rho;
        cfg.t0 = self.solver.t0;
        cfg.eps_schedule = SolverConfig::default_schedule(point.delta, self.solver.t0)?;
        cfg.max_outer = self.solver.max_outer;
        cfg.max_backtracks = self.solver.max_backtracks;
        cfg.max_inner = self.solver.max_inner;
        if point.is_scaled() {
            cfg = cfg.with_scaling(GammaSchedule::new(point.s1, point.s2)?);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), String> {
        let p = &self.problem;
        if !(p.lambda >= 0.0 && p.lambda.is_finite()) {
            return Err(format!("problem.lambda must be >= 0, got {}", p.lambda));
        }
        if !(p.background > 0.0 && p.background.is_finite()) {
            return Err(format!("problem.background must be positive, got {}", p.background));
        }
        if p.sigma_psf.is_nan() || p.sigma_psf <= 0.0 {
            return Err(format!("problem.sigma_psf must be positive, got {}", p.sigma_psf));
        }
        if !(p.low >= 0.0 && p.peak > p.low) {
            return Err(format!("need 0 <= problem.low < problem.peak, got {} and {}", p.low, p.peak));
        }
        if p.rows == 0 || p.cols == 0 {
            return Err("problem.rows and problem.cols must be positive".into());
        }

        let s = &self.solver;
        match (s.l0, s.tau0) {
            (None, None) => return Err("solver needs L0 or tau0".into()),
            (Some(l), _) if !(l > 0.0 && l.is_finite()) => return Err(format!("solver.L0 must be positive, got {l}")),
            (_, Some(t)) if !(t > 0.0 && t.is_finite()) => return Err(format!("solver.tau0 must be positive, got {t}")),
            (Some(l), Some(t)) if ((l * t) - 1.0).abs() > 1e-12 => {
                return Err(format!("solver.tau0 = {t} is not 1 / L0 = {}", 1.0 / l))
            }
            _ => {}
        }
        for point in std::iter::once(self.single_point()).chain(self.sweep_points()) {
            if !(point.delta > 0.0 && point.delta <= 1.0) {
                return Err(format!("delta must lie in (0, 1], got {}", point.delta));
            }
            self.solver_config(point).map_err(|e| e.to_string())?;
        }
        if let Some(l) = self.reference.l0 {
            if !(l > 0.0 && l.is_finite()) {
                return Err(format!("reference.L0 must be positive, got {l}"));
            }
        }
        if self.reference.iterations == 0 {
            return Err("reference.iterations must be positive".into());
        }
        Ok(())
    }
}

/// Reads and validates `path`.
pub fn load_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    ExperimentConfig::parse(&text, path)
}

/// Root for relative paths in a config loaded from `config_path`.
pub fn output_root(config_path: &Path) -> PathBuf {
    match std::env::var_os(OUTPUT_ROOT_ENV) {
        Some(root) if !root.is_empty() => PathBuf::from(root),
        _ => config_path
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from(".")),
    }
}

/// Joins `path` onto `root` unless it is already absolute.
pub fn resolve(root: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        root.join(path)
    }
}

/// Creates `dir` if needed and checks that a file can be written in it.
pub fn ensure_writable(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let probe = dir.join(format!(".sfista-probe-{}", std::process::id()));
    fs::write(&probe, b"").map_err(io_err(&probe))?;
    fs::remove_file(&probe).map_err(io_err(&probe))?;
    Ok(())
}
