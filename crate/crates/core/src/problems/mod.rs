//! Composite objectives `F = f + g` with `g = lambda * TV + indicator(x >= 0)`.

use std::borrow::Cow;

use crate::error::Result;
use crate::grid::ImageGrid;
use crate::linops::grad;

mod noise;
mod phantom;
pub mod pgm;
mod poisson;
mod quadratic;

pub use noise::poisson_corrupt;
pub use phantom::{make_phantom, rescale_to_range};
pub use poisson::{kl_gradient, kl_value, lf_estimate, lipschitz_bound, objective, Background, PoissonDeblurProblem};
pub use quadratic::SeparableQuadratic;

/// `F(x)` split into its smooth and nonsmooth parts.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveValue {
    pub f_val: f64,
    /// `lambda * TV(x)`, or `+inf` when `x` leaves the nonnegative orthant.
    pub g_val: f64,
    pub total: f64,
    pub feasible: bool,
}

impl ObjectiveValue {
    pub fn new(f_val: f64, g_val: Option<f64>) -> Self {
        match g_val {
            Some(g) if f_val.is_finite() => Self {
                f_val,
                g_val: g,
                total: f_val + g,
                feasible: true,
            },
            _ => Self {
                f_val,
                g_val: g_val.unwrap_or(f64::INFINITY),
                total: f64::INFINITY,
                feasible: false,
            },
        }
    }
}

/// A problem `min f(x) + lambda TV(x) + indicator(x >= 0)` with smooth convex `f`.
pub trait CompositeProblem: Sync {
    fn shape(&self) -> (usize, usize);

    fn f_value(&self, x: &ImageGrid) -> Result<f64>;

    fn f_gradient(&self, x: &ImageGrid) -> Result<ImageGrid>;

    /// Bregman distance `f(x) - f(y) - <grad_y, x - y>`.
    fn f_bregman(&self, x: &ImageGrid, y: &ImageGrid, grad_y: &ImageGrid) -> Result<f64> {
        let diff = x.sub(y)?;
        Ok(self.f_value(x)? - self.f_value(y)? - grad_y.dot(&diff)?)
    }

    /// Weight of the total-variation term.
    fn tv_weight(&self) -> f64;

    /// `V(y)` of a split `-grad f = U - V` with `V > 0`, if the problem has one.
    fn split_denominator(&self, _y: &ImageGrid) -> Option<Cow<'_, ImageGrid>> {
        None
    }

    /// `g(x)`, or `None` outside the nonnegative orthant.
    fn g_value(&self, x: &ImageGrid) -> Option<f64> {
        if x.is_nonnegative() {
            Some(self.tv_weight() * tv_value(x))
        } else {
            None
        }
    }

    fn objective(&self, x: &ImageGrid) -> ObjectiveValue {
        let f_val = self.f_value(x).unwrap_or(f64::INFINITY);
        ObjectiveValue::new(f_val, self.g_value(x))
    }
}

/// Isotropic total variation `sum_i ||(grad x)_i||_2`.
pub fn tv_value(x: &ImageGrid) -> f64 {
    grad(x).pixel_norms().sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tv_examples() {
        assert_eq!(tv_value(&ImageGrid::filled(4, 4, 2.0)), 0.0);
        assert_eq!(tv_value(&ImageGrid::new(1, 2, vec![0.0, 3.0]).unwrap()), 3.0);
    }

    #[test]
    fn tv_matches_per_pixel_sum() {
        let x = ImageGrid::from_fn(8, 8, |r, c| ((r * 13 + c * 7) % 11) as f64 - 4.5);
        let mut expected = 0.0;
        for r in 0..8 {
            for c in 0..8 {
                let dh = if c < 7 { x[(r, c + 1)] - x[(r, c)] } else { 0.0 };
                let dv = if r < 7 { x[(r + 1, c)] - x[(r, c)] } else { 0.0 };
                expected += (dh * dh + dv * dv).sqrt();
            }
        }
        assert!((tv_value(&x) - expected).abs() < 1e-12);
    }

    #[test]
    fn infeasible_objective_is_flagged() {
        let v = ObjectiveValue::new(1.0, None);
        assert!(!v.feasible);
        assert!(v.total.is_infinite());
    }
}
