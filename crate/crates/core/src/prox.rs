//! Inexact scaled proximal map of `lambda * TV + indicator(x >= 0)` with a
//! duality-gap certificate.
//!
//! The primal subproblem is
//!
//! ```text
//! P(x) = lambda * TV(x) + indicator(x >= 0) + ||x - ybar||_D^2 / (2 tau)
//! ```
//!
//! and writing `lambda ||v|| = max_{||w|| <= lambda} <w, v>` per pixel gives
//! the concave dual
//!
//! ```text
//! Q(w) = <M* w, x(w)> + ||x(w) - ybar||_D^2 / (2 tau),
//! x(w) = P_{Y,D}(ybar - tau D^{-1} M* w),    ||w_i|| <= lambda,
//! ```
//!
//! with `M` the forward-difference gradient. Any dual-feasible `w` certifies
//! `x(w)` to accuracy `P(x(w)) - Q(w)`.

use crate::error::{check_shape, Error, Result};
use crate::grid::{DualField, ImageGrid};
use crate::linops::{grad_adjoint_into, grad_into, GRADIENT_NORM_SQ_BOUND};
use crate::metrics::DiagonalMetric;
use crate::problems::tv_value;

/// Default cap on dual iterations per proximal evaluation.
pub const DEFAULT_MAX_INNER: usize = 500;

/// After the first few inner iterations the gap is only evaluated this often.
const GAP_CHECK_EVERY: usize = 4;

/// Accuracy sequence for the proximal evaluations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum EpsilonSchedule {
    /// `c0 * a^k`
    Geometric { c0: f64, a: f64 },
    /// `k^(-b_exponent) / (k + t0)^2`
    Polynomial { b_exponent: f64, t0: f64 },
}

impl EpsilonSchedule {
    pub fn geometric(c0: f64, a: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(Error::InvalidParameter(format!("c0 must be positive, got {c0}")));
        }
        if !(a > 0.0 && a < 1.0) {
            return Err(Error::InvalidParameter(format!("ratio a must lie in (0, 1), got {a}")));
        }
        Ok(Self::Geometric { c0, a })
    }

    pub fn polynomial(b_exponent: f64, t0: f64) -> Result<Self> {
        if !(b_exponent > 2.0 && b_exponent.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "exponent must exceed 2, got {b_exponent}"
            )));
        }
        if !(t0 >= 1.0 && t0.is_finite()) {
            return Err(Error::InvalidParameter(format!("t0 must be >= 1, got {t0}")));
        }
        Ok(Self::Polynomial { b_exponent, t0 })
    }

    /// The geometric ratio must stay below the step growth parameter `delta`.
    pub fn check_against_delta(&self, delta: f64) -> Result<()> {
        match *self {
            Self::Geometric { a, .. } if a >= delta => Err(Error::InvalidParameter(format!(
                "geometric ratio {a} must be below delta = {delta}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn epsilon(&self, k: usize) -> f64 {
        epsilon_k(self, k)
    }
}

pub fn epsilon_k(s: &EpsilonSchedule, k: usize) -> f64 {
    let kf = k as f64;
    match *s {
        EpsilonSchedule::Geometric { c0, a } => c0 * a.powi(k as i32),
        EpsilonSchedule::Polynomial { b_exponent, t0 } => kf.powf(-b_exponent) / (kf + t0).powi(2),
    }
}

/// One proximal subproblem: point `ybar`, step `tau`, metric `D`, TV weight
/// `lambda` and target accuracy `epsilon`.
#[derive(Clone, Copy, Debug)]
pub struct ProxRequest<'a> {
    pub ybar: &'a ImageGrid,
    pub tau: f64,
    pub metric: &'a DiagonalMetric,
    pub lambda: f64,
    pub epsilon: f64,
    pub max_inner: usize,
}

impl ProxRequest<'_> {
    fn validate(&self) -> Result<()> {
        check_shape(self.ybar.shape(), self.metric.shape())?;
        if !(self.tau > 0.0 && self.tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("tau must be positive, got {}", self.tau)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        Ok(())
    }

    fn check_dual_feasible(&self, w: &DualField) -> Result<()> {
        check_shape(self.ybar.shape(), w.shape())?;
        let radius = self.lambda * (1.0 + 1e-12);
        if let Some(n) = w.pixel_norms().find(|&n| n > radius) {
            return Err(Error::Domain(format!(
                "dual variable norm {n} exceeds lambda = {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

/// An approximate proximal point with the dual point that certifies it.
#[derive(Clone, Debug)]
pub struct ProxCertificate {
    /// Primal point, always in the nonnegative orthant.
    pub x: ImageGrid,
    pub w: DualField,
    /// `P(x) - Q(w)` at exit.
    pub gap: f64,
    /// Gap at the starting (warm) dual point.
    pub initial_gap: f64,
    pub inner_iters: usize,
    pub converged: bool,
}

/// `P(x)`, or `+inf` outside the nonnegative orthant.
pub fn primal_value(req: &ProxRequest<'_>, x: &ImageGrid) -> Result<f64> {
    check_shape(req.ybar.shape(), x.shape())?;
    if !x.is_nonnegative() {
        return Ok(f64::INFINITY);
    }
    let dist = req.metric.norm_sq(&x.sub(req.ybar)?)?;
    Ok(req.lambda * tv_value(x) + dist / (2.0 * req.tau))
}

/// `Q(w)`; `w` must satisfy `||w_i|| <= lambda` at every pixel.
pub fn dual_value(req: &ProxRequest<'_>, w: &DualField) -> Result<f64> {
    req.check_dual_feasible(w)?;
    let (rows, cols) = w.shape();
    let mut adj = vec![0.0; rows * cols];
    grad_adjoint_into(w.horizontal(), w.vertical(), rows, cols, &mut adj);
    let x = primal_from_dual(req, w)?;
    let linear: f64 = adj.iter().zip(x.iter()).map(|(a, b)| a * b).sum();
    let dist = req.metric.norm_sq(&x.sub(req.ybar)?)?;
    Ok(linear + dist / (2.0 * req.tau))
}

/// `x(w) = P_{Y,D}(ybar - tau D^{-1} M* w)`
pub fn primal_from_dual(req: &ProxRequest<'_>, w: &DualField) -> Result<ImageGrid> {
    check_shape(req.ybar.shape(), w.shape())?;
    check_shape(req.ybar.shape(), req.metric.shape())?;
    let (rows, cols) = w.shape();
    let mut adj = vec![0.0; rows * cols];
    grad_adjoint_into(w.horizontal(), w.vertical(), rows, cols, &mut adj);
    let scaled_step: Vec<f64> = req.metric.diagonal().iter().map(|d| req.tau / d).collect();
    let mut x = vec![0.0; rows * cols];
    project_shifted(req.ybar.as_slice(), &scaled_step, &adj, &mut x);
    Ok(ImageGrid::from_vec_unchecked(rows, cols, x))
}

fn project_shifted(ybar: &[f64], scaled_step: &[f64], adj: &[f64], out: &mut [f64]) {
    for (((o, y), s), a) in out.iter_mut().zip(ybar).zip(scaled_step).zip(adj) {
        *o = (y - s * a).max(0.0);
    }
}

/// `sum_i lambda ||g_i|| - <w_i, g_i>` with `g = grad x(w)`.
///
/// Equals `P(x(w)) - Q(w)`: the quadratic terms cancel. Every summand is
/// nonnegative for dual-feasible `w`, so the sum carries no cancellation error.
fn gap_from_gradient(lambda: f64, gh: &[f64], gv: &[f64], wh: &[f64], wv: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 0..gh.len() {
        acc += lambda * (gh[i] * gh[i] + gv[i] * gv[i]).sqrt() - (wh[i] * gh[i] + wv[i] * gv[i]);
    }
    acc
}

/// Scratch buffers for one run of the dual ascent.
struct Workspace {
    rows: usize,
    cols: usize,
    scaled_step: Vec<f64>,
    adj: Vec<f64>,
    x: Vec<f64>,
    gh: Vec<f64>,
    gv: Vec<f64>,
}

impl Workspace {
    /// Writes `x(w)` into `self.x` and `grad x(w)` into `gh, gv`.
    fn primal_and_gradient(&mut self, ybar: &[f64], wh: &[f64], wv: &[f64]) {
        grad_adjoint_into(wh, wv, self.rows, self.cols, &mut self.adj);
        project_shifted(ybar, &self.scaled_step, &self.adj, &mut self.x);
        grad_into(&self.x, self.rows, self.cols, &mut self.gh, &mut self.gv);
    }
}

/// Accelerated projected gradient ascent on `Q`, stopped at the first checked
/// iterate with `P(x) - Q(w) <= epsilon`.
///
/// The dual step is `min(D) / (8 tau)`, the reciprocal of a bound on the
/// Lipschitz constant of `grad Q`, and the extrapolation weight at inner
/// iteration `l` is `(l - 1) / (l + 2)`. When the budget runs out the
/// lowest-gap iterate seen (including the warm start) is returned with
/// `converged = false`.
pub fn inexact_prox(req: &ProxRequest<'_>, warm: Option<&DualField>) -> Result<ProxCertificate> {
    req.validate()?;
    let (rows, cols) = req.ybar.shape();
    let n = rows * cols;

    if req.lambda == 0.0 {
        return Ok(ProxCertificate {
            x: req.ybar.map(|v| v.max(0.0)),
            w: DualField::zeros(rows, cols),
            gap: 0.0,
            initial_gap: 0.0,
            inner_iters: 0,
            converged: true,
        });
    }

    let mut w = match warm {
        Some(w0) if w0.shape() == (rows, cols) => w0.clone(),
        _ => DualField::zeros(rows, cols),
    };
    w.project_ball(req.lambda);

    let ybar = req.ybar.as_slice();
    let mut ws = Workspace {
        rows,
        cols,
        scaled_step: req.metric.diagonal().iter().map(|d| req.tau / d).collect(),
        adj: vec![0.0; n],
        x: vec![0.0; n],
        gh: vec![0.0; n],
        gv: vec![0.0; n],
    };

    ws.primal_and_gradient(ybar, &w.horizontal, &w.vertical);
    let initial_gap = gap_from_gradient(req.lambda, &ws.gh, &ws.gv, &w.horizontal, &w.vertical);
    let mut best_gap = initial_gap;
    let mut best_x = ws.x.clone();
    let mut best_w = w.clone();
    if initial_gap <= req.epsilon {
        return Ok(finish(rows, cols, best_x, best_w, best_gap, initial_gap, 0, true));
    }

    let step = req.metric.min_entry() / (GRADIENT_NORM_SQ_BOUND * req.tau);
    let mut v = w.clone();
    let mut next = w.clone();
    for l in 1..=req.max_inner {
        ws.primal_and_gradient(ybar, &v.horizontal, &v.vertical);
        for i in 0..n {
            next.horizontal[i] = v.horizontal[i] + step * ws.gh[i];
            next.vertical[i] = v.vertical[i] + step * ws.gv[i];
        }
        next.project_ball(req.lambda);

        if l < GAP_CHECK_EVERY || l % GAP_CHECK_EVERY == 0 || l == req.max_inner {
            ws.primal_and_gradient(ybar, &next.horizontal, &next.vertical);
            let gap = gap_from_gradient(req.lambda, &ws.gh, &ws.gv, &next.horizontal, &next.vertical);
            if gap <= req.epsilon {
                return Ok(finish(rows, cols, ws.x, next, gap, initial_gap, l, true));
            }
            if gap < best_gap {
                best_gap = gap;
                best_x.copy_from_slice(&ws.x);
                best_w.clone_from(&next);
            }
        }

        let beta = (l as f64 - 1.0) / (l as f64 + 2.0);
        for i in 0..n {
            v.horizontal[i] = next.horizontal[i] + beta * (next.horizontal[i] - w.horizontal[i]);
            v.vertical[i] = next.vertical[i] + beta * (next.vertical[i] - w.vertical[i]);
        }
        std::mem::swap(&mut w, &mut next);
    }
    Ok(finish(rows, cols, best_x, best_w, best_gap, initial_gap, req.max_inner, false))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    rows: usize,
    cols: usize,
    x: Vec<f64>,
    w: DualField,
    gap: f64,
    initial_gap: f64,
    inner_iters: usize,
    converged: bool,
) -> ProxCertificate {
    ProxCertificate {
        x: ImageGrid::from_vec_unchecked(rows, cols, x),
        w,
        gap,
        initial_gap,
        inner_iters,
        converged,
    }
}

/// Source of approximate proximal points for the outer solver.
pub trait ProxOracle: Sync {
    fn solve(&self, req: &ProxRequest<'_>, warm: Option<&DualField>) -> Result<ProxCertificate>;
}

/// The duality-gap certified dual ascent of [`inexact_prox`].
#[derive(Clone, Copy, Debug, Default)]
pub struct DualAscentProx;

impl ProxOracle for DualAscentProx {
    fn solve(&self, req: &ProxRequest<'_>, warm: Option<&DualField>) -> Result<ProxCertificate> {
        inexact_prox(req, warm)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request<'a>(ybar: &'a ImageGrid, metric: &'a DiagonalMetric, lambda: f64, eps: f64) -> ProxRequest<'a> {
        ProxRequest {
            ybar,
            tau: 0.7,
            metric,
            lambda,
            epsilon: eps,
            max_inner: 5000,
        }
    }

    fn signal(rows: usize, cols: usize) -> ImageGrid {
        ImageGrid::from_fn(rows, cols, |r, c| ((r * 7 + c * 3) % 5) as f64 * 0.4 - 0.3)
    }

    fn metric(rows: usize, cols: usize) -> DiagonalMetric {
        let d = ImageGrid::from_fn(rows, cols, |r, c| 0.5 + ((r + 2 * c) % 3) as f64 * 0.5);
        DiagonalMetric::new(d, 0.5, 1.5).unwrap()
    }

    #[test]
    fn schedule_values() {
        let g = EpsilonSchedule::geometric(1.0, 0.49).unwrap();
        assert_eq!(g.epsilon(1), 0.49);
        let p = EpsilonSchedule::polynomial(2.1, 1.0).unwrap();
        assert_eq!(p.epsilon(1), 0.25);
        assert!(g.check_against_delta(0.98).is_ok());
        assert!(g.check_against_delta(0.4).is_err());
        assert!(EpsilonSchedule::polynomial(2.0, 1.0).is_err());
        assert!(EpsilonSchedule::geometric(1.0, 1.0).is_err());
    }

    #[test]
    fn zero_lambda_is_projection() {
        let y = signal(4, 5);
        let m = metric(4, 5);
        let cert = inexact_prox(&request(&y, &m, 0.0, 0.0), None).unwrap();
        assert!(cert.converged);
        assert_eq!(cert.gap, 0.0);
        assert!(cert.inner_iters <= 1);
        assert_eq!(cert.x, y.map(|v| v.max(0.0)));
        let req = request(&y, &m, 0.0, 0.0);
        let gap = primal_value(&req, &cert.x).unwrap() - dual_value(&req, &cert.w).unwrap();
        assert_eq!(gap, 0.0);
    }

    #[test]
    fn dual_value_at_origin() {
        let y = signal(3, 3);
        let m = metric(3, 3);
        let req = request(&y, &m, 0.2, 0.0);
        let proj = y.map(|v| v.max(0.0));
        let expected = m.norm_sq(&proj.sub(&y).unwrap()).unwrap() / (2.0 * req.tau);
        assert!((dual_value(&req, &DualField::zeros(3, 3)).unwrap() - expected).abs() < 1e-14);
        assert_eq!(primal_from_dual(&req, &DualField::zeros(3, 3)).unwrap(), proj);
    }

    #[test]
    fn primal_value_examples() {
        let y = signal(3, 4).map(|v| v.abs());
        let m = metric(3, 4);
        let req = request(&y, &m, 0.3, 0.0);
        assert!((primal_value(&req, &y).unwrap() - 0.3 * tv_value(&y)).abs() < 1e-15);
        let mut neg = y.clone();
        neg[(0, 0)] = -1.0;
        assert!(primal_value(&req, &neg).unwrap().is_infinite());
    }

    #[test]
    fn infeasible_dual_is_rejected() {
        let y = signal(2, 2);
        let m = metric(2, 2);
        let req = request(&y, &m, 0.1, 0.0);
        let w = DualField::new(2, 2, vec![0.2, 0.0, 0.0, 0.0], vec![0.0; 4]).unwrap();
        assert!(matches!(dual_value(&req, &w), Err(Error::Domain(_))));
    }

    #[test]
    fn stable_gap_equals_primal_minus_dual() {
        let y = signal(5, 4);
        let m = metric(5, 4);
        let req = request(&y, &m, 0.25, 1e-3);
        let cert = inexact_prox(&req, None).unwrap();
        let direct = primal_value(&req, &cert.x).unwrap() - dual_value(&req, &cert.w).unwrap();
        assert!((direct - cert.gap).abs() < 1e-12);
        assert!(cert.converged && cert.gap <= 1e-3);
        assert!(cert.w.max_pixel_norm() <= 0.25);
    }

    #[test]
    fn warm_start_cannot_increase_gap() {
        let y = signal(6, 6);
        let m = metric(6, 6);
        let mut req = request(&y, &m, 0.4, 0.0);
        req.max_inner = 7;
        let first = inexact_prox(&req, None).unwrap();
        let second = inexact_prox(&req, Some(&first.w)).unwrap();
        assert!(second.gap <= second.initial_gap);
        assert!(second.initial_gap <= first.gap + 1e-15);
    }
}
