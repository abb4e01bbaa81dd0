//! TV-regularized Kullback-Leibler deblurring.

use std::borrow::Cow;

use crate::error::{check_shape, Error, Result};
use crate::grid::ImageGrid;
use crate::linops::BlurOperator;

use super::{CompositeProblem, ObjectiveValue};

/// Additive background `b` of the imaging model `z ~ Poisson(Hx + b)`.
#[derive(Clone, Debug, PartialEq)]
pub enum Background {
    Uniform(f64),
    Field(ImageGrid),
}

impl Background {
    fn value_at(&self, i: usize) -> f64 {
        match self {
            Background::Uniform(b) => *b,
            Background::Field(g) => g.as_slice()[i],
        }
    }
}

/// `min_x KL(Hx + b; z) + lambda TV(x)  s.t.  x >= 0`.
#[derive(Clone, Debug)]
pub struct PoissonDeblurProblem {
    blur: BlurOperator,
    background: Background,
    data: ImageGrid,
    lambda: f64,
    hte: ImageGrid,
    he_max: f64,
    hte_max: f64,
}

impl PoissonDeblurProblem {
    pub fn new(blur: BlurOperator, background: Background, data: ImageGrid, lambda: f64) -> Result<Self> {
        check_shape(blur.shape(), data.shape())?;
        if !data.is_nonnegative() {
            return Err(Error::Domain("observed data must be nonnegative".into()));
        }
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
        }
        match &background {
            Background::Uniform(b) if !(b.is_finite() && *b > 0.0) => {
                return Err(Error::Domain(format!("background must be positive, got {b}")));
            }
            Background::Field(g) => {
                check_shape(data.shape(), g.shape())?;
                if g.min() <= 0.0 {
                    return Err(Error::Domain("background must be positive".into()));
                }
            }
            _ => {}
        }
        let (rows, cols) = data.shape();
        let ones = ImageGrid::ones(rows, cols);
        let he = blur.apply(&ones)?;
        let hte = blur.apply_adjoint(&ones)?;
        if hte.min() <= 0.0 || he.min() <= 0.0 {
            return Err(Error::Domain("blur must have He > 0 and H^T e > 0".into()));
        }
        Ok(Self {
            he_max: he.max(),
            hte_max: hte.max(),
            blur,
            background,
            data,
            lambda,
            hte,
        })
    }

    pub fn blur(&self) -> &BlurOperator {
        &self.blur
    }

    pub fn background(&self) -> &Background {
        &self.background
    }

    pub fn data(&self) -> &ImageGrid {
        &self.data
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `H^T e`
    pub fn hte(&self) -> &ImageGrid {
        &self.hte
    }

    pub fn he_max(&self) -> f64 {
        self.he_max
    }

    pub fn hte_max(&self) -> f64 {
        self.hte_max
    }

    /// Same blur and background with different data or weight.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        Self::new(self.blur.clone(), self.background.clone(), self.data.clone(), lambda)
    }

    /// `Hx + b`, rejecting any nonpositive entry.
    fn forward_model(&self, x: &ImageGrid) -> Result<ImageGrid> {
        let mut hx = self.blur.apply(x)?;
        for (i, v) in hx.as_mut_slice().iter_mut().enumerate() {
            *v += self.background.value_at(i);
            if *v <= 0.0 {
                return Err(Error::Domain(format!("(Hx + b) = {v} at pixel {i} is not positive")));
            }
        }
        Ok(hx)
    }
}

/// Generalized KL divergence `KL(Hx + b; z)` with `0 log 0 = 0`.
pub fn kl_value(p: &PoissonDeblurProblem, x: &ImageGrid) -> Result<f64> {
    let model = p.forward_model(x)?;
    Ok(model
        .iter()
        .zip(p.data.iter())
        .map(|(&m, &z)| {
            let log_term = if z > 0.0 { z * (z / m).ln() } else { 0.0 };
            log_term + m - z
        })
        .sum())
}

/// `H^T e - H^T (z / (Hx + b))`
pub fn kl_gradient(p: &PoissonDeblurProblem, x: &ImageGrid) -> Result<ImageGrid> {
    let model = p.forward_model(x)?;
    let ratio = p.data.zip_map(&model, |z, m| z / m)?;
    let back = p.blur.apply_adjoint(&ratio)?;
    p.hte.sub(&back)
}

/// `(max z / b^2) max(H^T e) max(He)`
pub fn lipschitz_bound(max_z: f64, background: f64, hte_max: f64, he_max: f64) -> f64 {
    max_z / (background * background) * hte_max * he_max
}

/// Closed-form gradient Lipschitz bound; requires a uniform background.
pub fn lf_estimate(p: &PoissonDeblurProblem) -> Result<f64> {
    match p.background {
        Background::Uniform(b) => Ok(lipschitz_bound(p.data.max(), b, p.hte_max, p.he_max)),
        Background::Field(_) => Err(Error::InvalidParameter(
            "the closed-form Lipschitz bound needs a uniform background".into(),
        )),
    }
}

pub fn objective(p: &PoissonDeblurProblem, x: &ImageGrid) -> ObjectiveValue {
    CompositeProblem::objective(p, x)
}

/// `r - ln(1 + r)`, accurate for small `|r|`.
fn log1p_gap(r: f64) -> f64 {
    if r.abs() < 1e-4 {
        let r2 = r * r;
        r2 * (0.5 - r / 3.0 + r2 / 4.0 - r2 * r / 5.0)
    } else {
        r - r.ln_1p()
    }
}

impl CompositeProblem for PoissonDeblurProblem {
    fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    fn f_value(&self, x: &ImageGrid) -> Result<f64> {
        kl_value(self, x)
    }

    fn f_gradient(&self, x: &ImageGrid) -> Result<ImageGrid> {
        kl_gradient(self, x)
    }

    /// With `u = Hy + b` and `r = H(x - y) / u` the Bregman distance of the KL
    /// term is `sum_i z_i (r_i - ln(1 + r_i))`, which avoids cancelling the
    /// large objective values against each other.
    fn f_bregman(&self, x: &ImageGrid, y: &ImageGrid, _grad_y: &ImageGrid) -> Result<f64> {
        let u = self.forward_model(y)?;
        let dh = self.blur.apply(&x.sub(y)?)?;
        let mut acc = 0.0;
        for ((&z, &ui), &di) in self.data.iter().zip(u.iter()).zip(dh.iter()) {
            let r = di / ui;
            if r <= -1.0 {
                return Err(Error::Domain("(Hx + b) is not positive".into()));
            }
            if z > 0.0 {
                acc += z * log1p_gap(r);
            }
        }
        Ok(acc)
    }

    fn tv_weight(&self) -> f64 {
        self.lambda
    }

    fn split_denominator(&self, _y: &ImageGrid) -> Option<Cow<'_, ImageGrid>> {
        Some(Cow::Borrowed(&self.hte))
    }
}
