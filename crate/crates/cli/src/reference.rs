//! High-accuracy reference solutions with an on-disk cache.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::{info, warn};
use sha2::{Digest, Sha256};
use sfista_core::metrics::GammaSchedule;
use sfista_core::problems::{CompositeProblem, PoissonDeblurProblem};
use sfista_core::prox::EpsilonSchedule;
use sfista_core::solver::{run, SolverConfig};
use sfista_core::ImageGrid;

use crate::error::{io_err, CliResult};

const MAGIC: &str = "sfista-reference 1";

/// Settings of the long reference run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ReferenceSettings {
    pub iterations: usize,
    pub tau0: f64,
    pub max_inner: usize,
    pub max_backtracks: usize,
}

impl ReferenceSettings {
    /// Monotone backtracking, no scaling, accuracy `1e-4 * 0.3^k`.
    pub fn solver_config(&self) -> sfista_core::Result<SolverConfig> {
        let mut cfg = SolverConfig::new(1.0, self.tau0)?;
        cfg.max_outer = self.iterations;
        cfg.max_inner = self.max_inner;
        cfg.max_backtracks = self.max_backtracks;
        cfg.eps_schedule = EpsilonSchedule::geometric(1e-4, 0.3)?;
        cfg.gamma_schedule = GammaSchedule::euclidean();
        cfg.metric_enabled = false;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Debug)]
pub struct Reference {
    pub x: ImageGrid,
    pub objective: f64,
    pub from_cache: bool,
}

/// Hex SHA-256 over the problem data, the starting point and the run settings.
pub fn cache_key(problem: &PoissonDeblurProblem, x0: &ImageGrid, settings: &ReferenceSettings) -> String {
    let mut h = Sha256::new();
    h.update(MAGIC.as_bytes());
    let (rows, cols) = problem.shape();
    h.update((rows as u64).to_le_bytes());
    h.update((cols as u64).to_le_bytes());
    for grid in [problem.data(), x0, problem.hte()] {
        grid.iter().for_each(|v| h.update(v.to_le_bytes()));
    }
    problem.blur().spectrum().iter().for_each(|v| h.update(v.to_le_bytes()));
    match problem.background() {
        sfista_core::problems::Background::Uniform(b) => h.update(b.to_le_bytes()),
        sfista_core::problems::Background::Field(f) => f.iter().for_each(|v| h.update(v.to_le_bytes())),
    }
    h.update(problem.lambda().to_le_bytes());
    h.update((settings.iterations as u64).to_le_bytes());
    h.update(settings.tau0.to_le_bytes());
    h.update((settings.max_inner as u64).to_le_bytes());
    h.update((settings.max_backtracks as u64).to_le_bytes());
    hex::encode(h.finalize())
}

pub fn cache_path(dir: &Path, key: &str) -> PathBuf {
    dir.join(format!("reference-{key}.bin"))
}

/// Returns `(x*, F(x*))` after `settings.iterations` monotone steps from `x0`,
/// reusing a cached result in `cache_dir` when one with the same key exists.
/// A damaged cache file is reported and recomputed.
pub fn compute_reference(
    problem: &PoissonDeblurProblem,
    x0: &ImageGrid,
    settings: &ReferenceSettings,
    cache_dir: Option<&Path>,
) -> CliResult<Reference> {
    let key = cache_key(problem, x0, settings);
    if let Some(dir) = cache_dir {
        let path = cache_path(dir, &key);
        if path.exists() {
            match read_cache(&path, problem.shape()) {
                Ok((x, objective)) => {
                    info!("reference cache hit {}", path.display());
                    return Ok(Reference {
                        x,
                        objective,
                        from_cache: true,
                    });
                }
                Err(reason) => warn!("ignoring damaged reference cache {}: {reason}", path.display()),
            }
        }
    }

    info!("computing reference solution ({} iterations)", settings.iterations);
    let out = run(problem, &settings.solver_config()?, x0)?;
    let objective = problem.objective(&out.x).total;
    if let Some(dir) = cache_dir {
        fs::create_dir_all(dir).map_err(io_err(dir))?;
        write_cache(&cache_path(dir, &key), &out.x, objective)?;
    }
    Ok(Reference {
        x: out.x,
        objective,
        from_cache: false,
    })
}

fn payload_bytes(x: &ImageGrid) -> Vec<u8> {
    x.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn write_cache(path: &Path, x: &ImageGrid, objective: f64) -> CliResult<()> {
    let payload = payload_bytes(x);
    let header = format!(
        "{MAGIC}\n{} {}\n{:016x}\n{}\n",
        x.rows(),
        x.cols(),
        objective.to_bits(),
        hex::encode(Sha256::digest(&payload))
    );
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    let mut file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    file.write_all(header.as_bytes())
        .and_then(|_| file.write_all(&payload))
        .and_then(|_| file.sync_all())
        .map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    Ok(())
}

fn read_cache(path: &Path, shape: (usize, usize)) -> Result<(ImageGrid, f64), String> {
    let bytes = fs::read(path).map_err(|e| e.to_string())?;
    let mut lines = Vec::with_capacity(4);
    let mut start = 0;
    for (i, &b) in bytes.iter().enumerate() {
        if lines.len() == 4 {
            break;
        }
        if b == b'\n' {
            lines.push(std::str::from_utf8(&bytes[start..i]).map_err(|e| e.to_string())?);
            start = i + 1;
        }
    }
    let [magic, dims, bits, digest] = lines[..] else {
        return Err("truncated header".into());
    };
    if magic != MAGIC {
        return Err(format!("unexpected header {magic:?}"));
    }
    let dims: Vec<usize> = dims.split(' ').map(|s| s.parse().map_err(|_| "bad dimensions")).collect::<Result<_, _>>()?;
    if dims != [shape.0, shape.1] {
        return Err(format!("cached shape {dims:?} does not match {shape:?}"));
    }
    let objective = f64::from_bits(u64::from_str_radix(bits, 16).map_err(|e| e.to_string())?);
    let payload = &bytes[start..];
    if payload.len() != shape.0 * shape.1 * 8 {
        return Err(format!("payload has {} bytes", payload.len()));
    }
    if hex::encode(Sha256::digest(payload)) != digest {
        return Err("checksum mismatch".into());
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let x = ImageGrid::new(shape.0, shape.1, data).map_err(|e| e.to_string())?;
    Ok((x, objective))
}
