//! Symmetric blur under reflexive boundary conditions, diagonalized by the DCT.

use crate::error::{check_shape, Error, Result};
use crate::grid::ImageGrid;

use super::dct::Dct2d;

/// A doubly symmetric point spread function on an odd square support.
///
/// Weights are stored row-major, `support x support`, with the center at
/// `(support / 2, support / 2)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPsf {
    sigma: f64,
    support: usize,
    weights: Vec<f64>,
}

impl GaussianPsf {
    /// Gaussian of width `sigma` on the smallest odd support `>= ceil(6 sigma)`.
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        let mut support = (6.0 * sigma).ceil() as usize;
        if support.is_multiple_of(2) {
            support += 1;
        }
        Self::with_support(sigma, support)
    }

    /// Gaussian sampled on an explicit odd support, renormalized to unit sum.
    pub fn with_support(sigma: f64, support: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if support.is_multiple_of(2) {
            return Err(Error::InvalidParameter(format!("support must be odd, got {support}")));
        }
        let half = (support / 2) as f64;
        let two_var = 2.0 * sigma * sigma;
        let mut weights: Vec<f64> = (0..support * support)
            .map(|i| {
                let dr = (i / support) as f64 - half;
                let dc = (i % support) as f64 - half;
                (-(dr * dr + dc * dc) / two_var).exp()
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            sigma,
            support,
            weights,
        })
    }

    /// The single-tap kernel: blurring with it is the identity.
    pub fn identity() -> Self {
        Self {
            sigma: 0.0,
            support: 1,
            weights: vec![1.0],
        }
    }

    /// Arbitrary nonnegative kernel, which must be symmetric under horizontal and vertical flips.
    pub fn from_weights(support: usize, weights: Vec<f64>) -> Result<Self> {
        if support.is_multiple_of(2) || weights.len() != support * support {
            return Err(Error::InvalidParameter(
                "kernel must be an odd square with support^2 weights".into(),
            ));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::InvalidParameter("kernel weights must be nonnegative".into()));
        }
        let at = |r: usize, c: usize| weights[r * support + c];
        for r in 0..support {
            for c in 0..support {
                let w = at(r, c);
                let tol = 1e-14 * w.abs().max(f64::MIN_POSITIVE);
                if (w - at(support - 1 - r, c)).abs() > tol || (w - at(r, support - 1 - c)).abs() > tol {
                    return Err(Error::InvalidParameter("kernel is not flip-symmetric".into()));
                }
            }
        }
        if weights.iter().sum::<f64>() <= 0.0 {
            return Err(Error::InvalidParameter("kernel has zero mass".into()));
        }
        Ok(Self {
            sigma: 0.0,
            support,
            weights,
        })
    }

    /// Width of the Gaussian, or 0 for kernels not built from one.
    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn support(&self) -> usize {
        self.support
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight at offset `(dr, dc)` from the center; zero outside the support.
    pub fn weight_at(&self, dr: isize, dc: isize) -> f64 {
        let half = (self.support / 2) as isize;
        if dr.abs() > half || dc.abs() > half {
            return 0.0;
        }
        self.weights[((dr + half) * self.support as isize + dc + half) as usize]
    }
}

/// Convolution with a symmetric PSF under reflexive boundaries, stored as its DCT eigenvalues.
#[derive(Clone, Debug)]
pub struct BlurOperator {
    rows: usize,
    cols: usize,
    spectrum: Vec<f64>,
    dct: Dct2d,
}

impl BlurOperator {
    pub fn identity(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            spectrum: vec![1.0; rows * cols],
            dct: Dct2d::new(rows, cols),
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// Eigenvalues in DCT-II coefficient order, row-major.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn apply(&self, x: &ImageGrid) -> Result<ImageGrid> {
        check_shape(self.shape(), x.shape())?;
        let mut buf = x.as_slice().to_vec();
        self.dct.forward(&mut buf);
        buf.iter_mut().zip(&self.spectrum).for_each(|(v, s)| *v *= s);
        self.dct.inverse(&mut buf);
        Ok(ImageGrid::from_vec_unchecked(self.rows, self.cols, buf))
    }

    /// Same as [`apply`](Self::apply): the operator is self-adjoint.
    pub fn apply_adjoint(&self, x: &ImageGrid) -> Result<ImageGrid> {
        self.apply(x)
    }
}

/// Builds the reflexive-boundary blur for `psf` on a `rows x cols` grid.
///
/// The first column of the blur matrix (Toeplitz plus Hankel part) is formed
/// from the centered PSF, and its DCT divided by the DCT of the first unit
/// vector gives the eigenvalues.
pub fn psf_to_spectrum(psf: &GaussianPsf, rows: usize, cols: usize) -> Result<BlurOperator> {
    if rows == 0 || cols == 0 {
        return Err(Error::Dimension(format!("empty grid {rows}x{cols}")));
    }
    if psf.support() > rows.min(cols) {
        return Err(Error::Dimension(format!(
            "PSF support {} exceeds grid {rows}x{cols}",
            psf.support()
        )));
    }
    let half = (psf.support() / 2) as isize;
    let mut first_column = vec![0.0; rows * cols];
    for a in 0..=half {
        for b in 0..=half {
            let mut acc = 0.0;
            for da in 0..2 {
                for db in 0..2 {
                    acc += psf.weight_at(a + da, b + db);
                }
            }
            first_column[a as usize * cols + b as usize] = acc;
        }
    }
    let mut unit = vec![0.0; rows * cols];
    unit[0] = 1.0;

    let dct = Dct2d::new(rows, cols);
    dct.forward(&mut first_column);
    dct.forward(&mut unit);
    let spectrum = first_column
        .iter()
        .zip(&unit)
        .map(|(a, u)| a / u)
        .collect();
    Ok(BlurOperator {
        rows,
        cols,
        spectrum,
        dct,
    })
}

pub fn apply_blur(op: &BlurOperator, x: &ImageGrid) -> Result<ImageGrid> {
    op.apply(x)
}

pub fn apply_blur_adjoint(op: &BlurOperator, x: &ImageGrid) -> Result<ImageGrid> {
    op.apply_adjoint(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mirror(i: isize, n: usize) -> usize {
        let n = n as isize;
        let j = if i < 0 {
            -i - 1
        } else if i >= n {
            2 * n - 1 - i
        } else {
            i
        };
        j as usize
    }

    /// Direct spatial convolution with a once-mirrored boundary.
    fn reflexive_convolution(psf: &GaussianPsf, x: &ImageGrid) -> ImageGrid {
        let half = (psf.support() / 2) as isize;
        ImageGrid::from_fn(x.rows(), x.cols(), |r, c| {
            let mut acc = 0.0;
            for dr in -half..=half {
                for dc in -half..=half {
                    let rr = mirror(r as isize - dr, x.rows());
                    let cc = mirror(c as isize - dc, x.cols());
                    acc += psf.weight_at(dr, dc) * x[(rr, cc)];
                }
            }
            acc
        })
    }

    fn pseudo_random(rows: usize, cols: usize, seed: u64) -> ImageGrid {
        let mut state = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ImageGrid::from_fn(rows, cols, |_, _| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
    }

    #[test]
    fn gaussian_support_rounds_up_to_odd() {
        assert_eq!(GaussianPsf::new(1.4).unwrap().support(), 9);
        assert_eq!(GaussianPsf::new(3.2).unwrap().support(), 21);
        assert_eq!(GaussianPsf::new(0.5).unwrap().support(), 3);
    }

    #[test]
    fn gaussian_is_normalized_and_symmetric() {
        let psf = GaussianPsf::new(1.4).unwrap();
        assert!((psf.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        for dr in -4..=4 {
            for dc in -4..=4 {
                assert_eq!(psf.weight_at(dr, dc), psf.weight_at(-dr, dc));
                assert_eq!(psf.weight_at(dr, dc), psf.weight_at(dr, -dc));
            }
        }
    }

    #[test]
    fn identity_psf_has_unit_spectrum() {
        let op = psf_to_spectrum(&GaussianPsf::identity(), 6, 5).unwrap();
        assert!(op.spectrum().iter().all(|s| (s - 1.0).abs() < 1e-14));
        let x = pseudo_random(6, 5, 3);
        assert!(op.apply(&x).unwrap().max_abs_diff(&x).unwrap() < 1e-14);
    }

    #[test]
    fn support_larger_than_grid_is_rejected() {
        let psf = GaussianPsf::new(1.4).unwrap();
        assert!(matches!(psf_to_spectrum(&psf, 8, 64), Err(Error::Dimension(_))));
    }

    #[test]
    fn normalized_psf_preserves_constants() {
        let psf = GaussianPsf::with_support(1.4, 9).unwrap();
        let op = psf_to_spectrum(&psf, 64, 64).unwrap();
        let he = op.apply(&ImageGrid::ones(64, 64)).unwrap();
        assert!(he.iter().all(|v| (v - 1.0).abs() < 1e-12));
        assert!(op.spectrum().iter().all(|s| s.abs() <= 1.0 + 1e-12));
    }

    #[test]
    fn matches_brute_force_convolution() {
        for &(sigma, rows, cols) in &[(1.4, 9, 9), (1.0, 8, 8), (1.4, 16, 16), (1.4, 12, 10), (0.6, 5, 16)] {
            let psf = GaussianPsf::new(sigma).unwrap();
            let op = psf_to_spectrum(&psf, rows, cols).unwrap();
            let x = pseudo_random(rows, cols, rows as u64 * 31 + cols as u64);
            let fast = op.apply(&x).unwrap();
            let slow = reflexive_convolution(&psf, &x);
            assert!(fast.max_abs_diff(&slow).unwrap() < 1e-10, "{rows}x{cols}");
        }
    }

    #[test]
    fn spectrum_matches_cosine_series() {
        // For a doubly symmetric kernel the eigenvalue at frequency (u, v) is
        // sum_{i,j} p(i,j) cos(pi u i / m) cos(pi v j / n).
        let psf = GaussianPsf::new(0.9).unwrap();
        let (m, n) = (11, 7);
        let op = psf_to_spectrum(&psf, m, n).unwrap();
        let half = (psf.support() / 2) as isize;
        let pi = std::f64::consts::PI;
        for u in 0..m {
            for v in 0..n {
                let mut acc = 0.0;
                for i in -half..=half {
                    for j in -half..=half {
                        acc += psf.weight_at(i, j)
                            * (pi * (u as f64) * (i as f64) / m as f64).cos()
                            * (pi * (v as f64) * (j as f64) / n as f64).cos();
                    }
                }
                assert!((op.spectrum()[u * n + v] - acc).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn blur_is_self_adjoint() {
        let psf = GaussianPsf::new(3.2).unwrap();
        let op = psf_to_spectrum(&psf, 32, 24).unwrap();
        let x = pseudo_random(32, 24, 11);
        let y = pseudo_random(32, 24, 12);
        let lhs = op.apply(&x).unwrap().dot(&y).unwrap();
        let rhs = x.dot(&op.apply_adjoint(&y).unwrap()).unwrap();
        let scale = op.apply(&x).unwrap().norm() * y.norm();
        assert!((lhs - rhs).abs() <= 1e-10 * scale);
    }

    #[test]
    fn wide_psf_keeps_positive_column_sums() {
        let psf = GaussianPsf::new(3.2).unwrap();
        let op = psf_to_spectrum(&psf, 32, 32).unwrap();
        let hte = op.apply_adjoint(&ImageGrid::ones(32, 32)).unwrap();
        assert!(hte.min() > 0.0);
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let op = BlurOperator::identity(4, 4);
        assert!(matches!(
            op.apply(&ImageGrid::zeros(4, 5)),
            Err(Error::ShapeMismatch { .. })
        ));
    }
}
