use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Independent Poisson draws with per-pixel mean `clean`, reproducible from `seed`.
pub fn poisson_corrupt(clean: &ImageGrid, seed: u64) -> Result<ImageGrid> {
    if !clean.is_nonnegative() {
        return Err(Error::Domain("Poisson means must be nonnegative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = clean
        .iter()
        .map(|&mean| {
            if mean == 0.0 {
                Ok(0.0)
            } else {
                Poisson::new(mean)
                    .map(|d| d.sample(&mut rng))
                    .map_err(|e| Error::Domain(format!("Poisson mean {mean}: {e}")))
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    ImageGrid::new(clean.rows(), clean.cols(), samples)
}
