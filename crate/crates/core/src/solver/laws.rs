//! Scalar update rules and runtime checks of the accelerated scheme.

use crate::error::{Error, Result};
use crate::grid::ImageGrid;
use crate::metrics::DiagonalMetric;
use crate::problems::CompositeProblem;

use super::IterationRecord;

/// `t_next = (1 + sqrt(1 + 4 (tau_prev / tau_next) t_prev^2)) / 2`
///
/// This is the positive root of `t^2 - t = (tau_prev / tau_next) t_prev^2`.
pub fn t_update(t_prev: f64, tau_prev: f64, tau_next: f64) -> f64 {
    let ratio = tau_prev / tau_next;
    0.5 * (1.0 + (1.0 + 4.0 * ratio * t_prev * t_prev).sqrt())
}

/// Residual of the quadratic identity, relative to `max(t_next^2, 1)`.
pub fn t_identity_residual(t_prev: f64, tau_prev: f64, tau_next: f64, t_next: f64) -> f64 {
    let ratio = tau_prev / tau_next;
    let residual = t_next * (t_next - 1.0) - ratio * t_prev * t_prev;
    residual.abs() / (t_next * t_next).max(1.0)
}

/// Sufficient-decrease test `D_f(x, y) <= ||x - y||_D^2 / (2 tau)`; ties accept.
pub fn backtracking_accept(
    f_bregman: f64,
    x_next: &ImageGrid,
    y: &ImageGrid,
    metric: &DiagonalMetric,
    tau: f64,
) -> Result<bool> {
    let bound = quadratic_bound(x_next, y, metric, tau)?;
    Ok(f_bregman <= bound)
}

pub(crate) fn quadratic_bound(x: &ImageGrid, y: &ImageGrid, metric: &DiagonalMetric, tau: f64) -> Result<f64> {
    Ok(metric.norm_sq(&x.sub(y)?)? / (2.0 * tau))
}

/// `L = (n / sum_i sqrt(tau_i))^2` over the given step sizes.
pub fn average_lipschitz_from_steps(taus: &[f64]) -> Result<f64> {
    if taus.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let s: f64 = taus.iter().map(|t| t.sqrt()).sum();
    let root = taus.len() as f64 / s;
    Ok(root * root)
}

/// Averaged Lipschitz estimate over the step sizes stored in `trace`.
pub fn average_lipschitz(trace: &[IterationRecord]) -> Result<f64> {
    let taus: Vec<f64> = trace.iter().map(|r| r.tau).collect();
    average_lipschitz_from_steps(&taus)
}

/// Both sides of the inexact descent inequality evaluated at one reference point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentLemmaSides {
    pub lhs: f64,
    pub rhs: f64,
}

impl DescentLemmaSides {
    pub const SLACK: f64 = 1e-8;

    pub fn holds(&self) -> bool {
        self.lhs <= self.rhs + Self::SLACK
    }
}

/// Evaluates
///
/// ```text
/// F(xt) + ||x - xt||_D^2/(2 tau) + (||xt - xb||_D^2/(2 tau) - D_f(xt, xb))
///     <= F(x) + ||x - xb||_D^2/(2 tau) + eps + sqrt(2 eps tau)/tau ||x - xt||_D
/// ```
/// from precomputed objective values and Bregman distance.
#[allow(clippy::too_many_arguments)]
pub(crate) fn descent_lemma_sides(
    x_tilde: &ImageGrid,
    x_bar: &ImageGrid,
    x_ref: &ImageGrid,
    f_tilde_total: f64,
    f_ref_total: f64,
    bregman: f64,
    tau: f64,
    metric: &DiagonalMetric,
    epsilon: f64,
) -> Result<DescentLemmaSides> {
    let two_tau = 2.0 * tau;
    let ref_to_tilde = metric.norm_sq(&x_ref.sub(x_tilde)?)?;
    let tilde_to_bar = metric.norm_sq(&x_tilde.sub(x_bar)?)?;
    let ref_to_bar = metric.norm_sq(&x_ref.sub(x_bar)?)?;
    let lhs = f_tilde_total + ref_to_tilde / two_tau + (tilde_to_bar / two_tau - bregman);
    let rhs = f_ref_total
        + ref_to_bar / two_tau
        + epsilon
        + (2.0 * epsilon * tau).sqrt() / tau * ref_to_tilde.sqrt();
    Ok(DescentLemmaSides { lhs, rhs })
}

/// Checks the inexact descent inequality for an `epsilon`-approximate
/// proximal-gradient point `x_tilde` computed at `x_bar`, against `x_ref`.
pub fn descent_lemma_probe<P: CompositeProblem + ?Sized>(
    x_tilde: &ImageGrid,
    x_bar: &ImageGrid,
    x_ref: &ImageGrid,
    tau: f64,
    metric: &DiagonalMetric,
    epsilon: f64,
    problem: &P,
) -> Result<bool> {
    let grad_bar = problem.f_gradient(x_bar)?;
    let bregman = problem.f_bregman(x_tilde, x_bar, &grad_bar)?;
    let sides = descent_lemma_sides(
        x_tilde,
        x_bar,
        x_ref,
        problem.objective(x_tilde).total,
        problem.objective(x_ref).total,
        bregman,
        tau,
        metric,
        epsilon,
    )?;
    Ok(sides.holds())
}
