use crate::error::{check_shape, Result};
use crate::grid::ImageGrid;

use super::CompositeProblem;

/// `f(x) = (curvature / 2) ||x - center||^2` with an optional TV weight.
///
/// Constant-curvature test problem: its Bregman distance is exactly
/// `(curvature / 2) ||x - y||^2`.
#[derive(Clone, Debug)]
pub struct SeparableQuadratic {
    pub curvature: f64,
    pub center: ImageGrid,
    pub lambda: f64,
}

impl CompositeProblem for SeparableQuadratic {
    fn shape(&self) -> (usize, usize) {
        self.center.shape()
    }

    fn f_value(&self, x: &ImageGrid) -> Result<f64> {
        Ok(0.5 * self.curvature * x.sub(&self.center)?.norm_sq())
    }

    fn f_gradient(&self, x: &ImageGrid) -> Result<ImageGrid> {
        Ok(x.sub(&self.center)?.scale(self.curvature))
    }

    fn f_bregman(&self, x: &ImageGrid, y: &ImageGrid, _grad_y: &ImageGrid) -> Result<f64> {
        check_shape(x.shape(), y.shape())?;
        Ok(0.5 * self.curvature * x.sub(y)?.norm_sq())
    }

    fn tv_weight(&self) -> f64 {
        self.lambda
    }
}
