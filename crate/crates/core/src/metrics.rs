//! Diagonal variable metrics built by the split-gradient rule.

use crate::error::{check_shape, Error, Result};
use crate::grid::ImageGrid;

/// A positive diagonal operator together with the band `[lower, upper]`
/// that contains every diagonal entry.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagonalMetric {
    d: ImageGrid,
    lower: f64,
    upper: f64,
}

impl DiagonalMetric {
    pub fn new(d: ImageGrid, lower: f64, upper: f64) -> Result<Self> {
        if !(lower > 0.0 && lower <= upper && upper.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "metric band [{lower}, {upper}] must satisfy 0 < lower <= upper"
            )));
        }
        if let Some(v) = d.iter().find(|&&v| v < lower || v > upper) {
            return Err(Error::Domain(format!(
                "diagonal entry {v} outside [{lower}, {upper}]"
            )));
        }
        Ok(Self { d, lower, upper })
    }

    pub fn identity(rows: usize, cols: usize) -> Self {
        Self {
            d: ImageGrid::ones(rows, cols),
            lower: 1.0,
            upper: 1.0,
        }
    }

    pub fn diagonal(&self) -> &ImageGrid {
        &self.d
    }

    pub fn shape(&self) -> (usize, usize) {
        self.d.shape()
    }

    pub fn lower(&self) -> f64 {
        self.lower
    }

    pub fn upper(&self) -> f64 {
        self.upper
    }

    /// Smallest diagonal entry; a tighter lower bound than the band.
    pub fn min_entry(&self) -> f64 {
        self.d.min()
    }

    pub fn is_identity(&self) -> bool {
        self.d.iter().all(|&v| v == 1.0)
    }

    /// `||x||_D^2 = sum_i d_i x_i^2`
    pub fn norm_sq(&self, x: &ImageGrid) -> Result<f64> {
        metric_norm_sq(self, x)
    }

    /// `D^{-1} x`
    pub fn apply_inverse(&self, x: &ImageGrid) -> Result<ImageGrid> {
        apply_inverse(self, x)
    }
}

/// Threshold schedule `gamma_k = sqrt(1 + s1 / (k+1)^s2)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GammaSchedule {
    s1: f64,
    s2: f64,
}

impl GammaSchedule {
    pub fn new(s1: f64, s2: f64) -> Result<Self> {
        if !(s1.is_finite() && s1 >= 0.0) {
            return Err(Error::InvalidParameter(format!("s1 must be nonnegative, got {s1}")));
        }
        if s1 > 0.0 && !(s2.is_finite() && s2 > 1.0) {
            return Err(Error::InvalidParameter(format!("s2 must exceed 1, got {s2}")));
        }
        Ok(Self { s1, s2 })
    }

    /// `s1 = 0`: every metric collapses to the identity.
    pub fn euclidean() -> Self {
        Self { s1: 0.0, s2: 2.0 }
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn s2(&self) -> f64 {
        self.s2
    }

    pub fn gamma(&self, k: usize) -> f64 {
        gamma_k(self, k)
    }
}

pub fn gamma_k(sched: &GammaSchedule, k: usize) -> f64 {
    (1.0 + sched.s1 / ((k + 1) as f64).powf(sched.s2)).sqrt()
}

/// `D = diag(1 / clamp(y / V, 1/gamma, gamma))` with band `[1/gamma, gamma]`.
pub fn split_gradient_metric(y: &ImageGrid, v: &ImageGrid, gamma: f64) -> Result<DiagonalMetric> {
    check_shape(y.shape(), v.shape())?;
    if !(gamma >= 1.0 && gamma.is_finite()) {
        return Err(Error::InvalidParameter(format!("gamma must be >= 1, got {gamma}")));
    }
    if let Some(bad) = v.iter().find(|&&vi| vi <= 0.0) {
        return Err(Error::Domain(format!("split-gradient denominator must be positive, got {bad}")));
    }
    let lo = 1.0 / gamma;
    let d = y.zip_map(v, |yi, vi| 1.0 / (yi / vi).clamp(lo, gamma))?;
    // 1/(1/gamma) can round above gamma; pin the band to the values actually produced.
    let lower = lo.min(d.min());
    let upper = gamma.max(d.max());
    DiagonalMetric::new(d, lower, upper)
}

/// Diagonal Loewner test `next <= (1 + gamma_bound) prev`.
pub fn loewner_chain_check(prev: &DiagonalMetric, next: &DiagonalMetric, gamma_bound: f64) -> Result<bool> {
    check_shape(prev.shape(), next.shape())?;
    let factor = 1.0 + gamma_bound;
    Ok(prev
        .d
        .iter()
        .zip(next.d.iter())
        .all(|(p, n)| *n <= factor * p))
}

pub fn metric_norm_sq(m: &DiagonalMetric, x: &ImageGrid) -> Result<f64> {
    check_shape(m.shape(), x.shape())?;
    Ok(m.d.iter().zip(x.iter()).map(|(d, v)| d * v * v).sum())
}

pub fn apply_inverse(m: &DiagonalMetric, x: &ImageGrid) -> Result<ImageGrid> {
    x.zip_map(&m.d, |v, d| v / d)
}

/// Projection onto the nonnegative orthant in the `D`-norm.
///
/// For a diagonal metric the problem separates per coordinate, so the result
/// is `max(x, 0)` whatever `d` is. The metric argument is kept for shape checking.
pub fn project_nonneg_scaled(m: &DiagonalMetric, x: &ImageGrid) -> Result<ImageGrid> {
    check_shape(m.shape(), x.shape())?;
    Ok(project_nonneg(x))
}

pub(crate) fn project_nonneg(x: &ImageGrid) -> ImageGrid {
    x.map(|v| v.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_values() {
        assert_eq!(GammaSchedule::euclidean().gamma(17), 1.0);
        let g = GammaSchedule::new(1e10, 3.0).unwrap();
        assert!((g.gamma(0) - 100_000.000_005).abs() < 1e-9);
        let g = GammaSchedule::new(3.0, 2.0).unwrap();
        assert!((g.gamma(2) - (4.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn gamma_decreases_for_positive_s1() {
        let g = GammaSchedule::new(5.0, 1.5).unwrap();
        for k in 0..200 {
            assert!(g.gamma(k + 1) < g.gamma(k));
            assert!(g.gamma(k) >= 1.0);
        }
    }

    #[test]
    fn schedule_validation() {
        assert!(GammaSchedule::new(1.0, 1.0).is_err());
        assert!(GammaSchedule::new(-1.0, 2.0).is_err());
        assert!(GammaSchedule::new(0.0, 0.5).is_ok());
    }

    #[test]
    fn split_gradient_clamps() {
        let y = ImageGrid::new(1, 3, vec![4.0, 0.0, 1.0]).unwrap();
        let v = ImageGrid::ones(1, 3);
        let m = split_gradient_metric(&y, &v, 2.0).unwrap();
        assert_eq!(m.diagonal().as_slice()[0], 0.5);
        assert_eq!(m.diagonal().as_slice()[2], 1.0);
        let m = split_gradient_metric(&y, &v, 10.0).unwrap();
        assert!((m.diagonal().as_slice()[1] - 10.0).abs() < 1e-14);
        let m = split_gradient_metric(&y, &v, 1.0).unwrap();
        assert!(m.is_identity());
    }

    #[test]
    fn split_gradient_rejects_nonpositive_denominator() {
        let y = ImageGrid::ones(1, 2);
        let v = ImageGrid::new(1, 2, vec![1.0, 0.0]).unwrap();
        assert!(matches!(split_gradient_metric(&y, &v, 2.0), Err(Error::Domain(_))));
    }

    #[test]
    fn loewner_examples() {
        let a = DiagonalMetric::new(ImageGrid::filled(2, 2, 0.5), 0.5, 0.5).unwrap();
        assert!(loewner_chain_check(&a, &a, 0.0).unwrap());
        let b = DiagonalMetric::new(ImageGrid::filled(2, 2, 1.0), 1.0, 1.0).unwrap();
        assert!(!loewner_chain_check(&a, &b, 0.5).unwrap());
        let c = DiagonalMetric::identity(3, 2);
        assert!(loewner_chain_check(&a, &c, 0.0).is_err());
    }

    #[test]
    fn norms_and_inverse() {
        let id = DiagonalMetric::identity(2, 3);
        let x = ImageGrid::new(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        assert_eq!(metric_norm_sq(&id, &x).unwrap(), x.norm_sq());
        let two = DiagonalMetric::new(ImageGrid::filled(2, 3, 2.0), 2.0, 2.0).unwrap();
        assert_eq!(metric_norm_sq(&two, &ImageGrid::ones(2, 3)).unwrap(), 12.0);
        let six = ImageGrid::filled(1, 1, 6.0);
        let m = DiagonalMetric::new(ImageGrid::filled(1, 1, 2.0), 2.0, 2.0).unwrap();
        assert_eq!(apply_inverse(&m, &six).unwrap().as_slice(), &[3.0]);
        assert_eq!(apply_inverse(&id, &x).unwrap(), x);
    }

    #[test]
    fn projection_examples() {
        let m = DiagonalMetric::new(ImageGrid::new(1, 2, vec![0.3, 7.0]).unwrap(), 0.3, 7.0).unwrap();
        let x = ImageGrid::new(1, 2, vec![-1.0, 2.0]).unwrap();
        assert_eq!(project_nonneg_scaled(&m, &x).unwrap().as_slice(), &[0.0, 2.0]);
        let pos = ImageGrid::new(1, 2, vec![0.0, 5.0]).unwrap();
        assert_eq!(project_nonneg_scaled(&m, &pos).unwrap(), pos);
    }
}
