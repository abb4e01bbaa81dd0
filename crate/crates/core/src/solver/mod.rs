//! Inexact scaled FISTA with adaptive backtracking.
//!
//! Each outer iteration tries the step `tau_k / delta` and shrinks it by `rho`
//! until the sufficient-decrease test passes. For every trial step the
//! momentum parameter, the projected extrapolated point, the diagonal metric
//! and an approximate proximal-gradient point are recomputed; the requested
//! proximal accuracy is fixed per outer iteration.

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::grid::{DualField, ImageGrid};
use crate::metrics::{gamma_k, loewner_chain_check, project_nonneg, split_gradient_metric, DiagonalMetric, GammaSchedule};
use crate::problems::CompositeProblem;
use crate::prox::{DualAscentProx, EpsilonSchedule, ProxOracle, ProxRequest, DEFAULT_MAX_INNER};

mod laws;

pub use laws::{
    average_lipschitz, average_lipschitz_from_steps, backtracking_accept, descent_lemma_probe, t_identity_residual,
    t_update, DescentLemmaSides,
};

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    /// Step shrink factor in `(0, 1)`.
    pub rho: f64,
    /// The first trial step of each iteration is `tau_k / delta`; `delta = 1` is monotone Armijo.
    pub delta: f64,
    pub tau0: f64,
    pub t0: f64,
    pub max_outer: usize,
    pub max_backtracks: usize,
    pub max_inner: usize,
    pub eps_schedule: EpsilonSchedule,
    pub gamma_schedule: GammaSchedule,
    pub metric_enabled: bool,
    /// Stop once `|F_{k+1} - F_k| <= rel_tol * |F_k|`.
    pub rel_tol: Option<f64>,
    /// Wall-clock budget; makes the iteration count machine dependent.
    pub time_budget: Option<Duration>,
}

impl SolverConfig {
    /// Defaults for the deblurring experiments: `rho = 0.85`, `t0 = 1`, 200
    /// outer iterations, 10 backtracks, geometric accuracy `(delta/2)^k` when
    /// `delta < 1` and `k^-2.1 / (k + t0)^2` when `delta = 1`, no scaling.
    pub fn new(delta: f64, tau0: f64) -> Result<Self> {
        let t0 = 1.0;
        let cfg = Self {
            rho: 0.85,
            delta,
            tau0,
            t0,
            max_outer: 200,
            max_backtracks: 10,
            max_inner: DEFAULT_MAX_INNER,
            eps_schedule: Self::default_schedule(delta, t0)?,
            gamma_schedule: GammaSchedule::euclidean(),
            metric_enabled: false,
            rel_tol: None,
            time_budget: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn default_schedule(delta: f64, t0: f64) -> Result<EpsilonSchedule> {
        if delta < 1.0 {
            EpsilonSchedule::geometric(1.0, delta / 2.0)
        } else {
            EpsilonSchedule::polynomial(2.1, t0)
        }
    }

    /// Turns on split-gradient scaling with thresholds from `schedule`.
    pub fn with_scaling(mut self, schedule: GammaSchedule) -> Self {
        self.metric_enabled = true;
        self.gamma_schedule = schedule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.rho > 0.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (0, 1), got {}", self.rho));
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return bad(format!("delta must lie in (0, 1], got {}", self.delta));
        }
        if !(self.tau0 > 0.0 && self.tau0.is_finite()) {
            return bad(format!("tau0 must be positive, got {}", self.tau0));
        }
        if !(self.t0 >= 1.0 && self.t0.is_finite()) {
            return bad(format!("t0 must be >= 1, got {}", self.t0));
        }
        if self.max_inner == 0 {
            return bad("max_inner must be positive".into());
        }
        self.eps_schedule.check_against_delta(self.delta)
    }
}

/// Moving parts of the iteration after `k` accepted steps.
#[derive(Clone, Debug)]
pub struct SolverState {
    pub x_curr: ImageGrid,
    pub x_prev: ImageGrid,
    pub t: f64,
    pub tau: f64,
    pub metric: DiagonalMetric,
    pub k: usize,
    pub warm_dual: Option<DualField>,
    /// `F(x_curr)`
    pub objective: f64,
}

impl SolverState {
    pub fn initial<P: CompositeProblem + ?Sized>(problem: &P, config: &SolverConfig, x0: &ImageGrid) -> Result<Self> {
        config.validate()?;
        if x0.shape() != problem.shape() {
            return Err(Error::ShapeMismatch {
                expected: problem.shape(),
                found: x0.shape(),
            });
        }
        let value = problem.objective(x0);
        if !value.feasible || !value.total.is_finite() {
            return Err(Error::Domain("starting point is not feasible".into()));
        }
        let (rows, cols) = x0.shape();
        Ok(Self {
            x_curr: x0.clone(),
            x_prev: x0.clone(),
            t: config.t0,
            tau: config.tau0,
            metric: DiagonalMetric::identity(rows, cols),
            k: 0,
            warm_dual: None,
            objective: value.total,
        })
    }
}

/// Telemetry of one accepted outer iteration (index `k` of the new iterate).
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub k: usize,
    /// `F(x^(k))`
    pub objective: f64,
    pub tau: f64,
    pub tau_prev: f64,
    pub t: f64,
    pub t_prev: f64,
    /// `1 / tau`
    pub l_estimate: f64,
    /// Averaged estimate over `tau_0, ..., tau_k`.
    pub l_average: f64,
    /// Rejected trial steps before acceptance.
    pub backtracks: usize,
    /// Dual iterations of the accepted proximal evaluation.
    pub inner_iters: usize,
    /// Dual iterations over all trials of this outer iteration.
    pub total_inner_iters: usize,
    pub epsilon: f64,
    pub gap: f64,
    pub prox_converged: bool,
    pub gamma: f64,
    /// `D_f(x^(k), y^(k))`
    pub bregman: f64,
    /// `||x^(k) - y^(k)||_D^2 / (2 tau)`
    pub quad_bound: f64,
    pub bt_condition_satisfied: bool,
    pub descent_lemma_ok: bool,
    pub loewner_ok: bool,
    pub elapsed_s: f64,
}

/// `P_Y(x + ((t - 1) / t_next)(x - x_prev))`.
///
/// The projection onto the orthant is the same in every diagonal metric.
pub fn extrapolate(state: &SolverState, t_next: f64) -> Result<ImageGrid> {
    let beta = (state.t - 1.0) / t_next;
    let moved = state.x_curr.zip_map(&state.x_prev, |x, xp| x + beta * (x - xp))?;
    Ok(project_nonneg(&moved))
}

fn build_metric<P: CompositeProblem + ?Sized>(
    problem: &P,
    config: &SolverConfig,
    y: &ImageGrid,
    gamma: f64,
) -> Result<DiagonalMetric> {
    if !config.metric_enabled {
        let (rows, cols) = y.shape();
        return Ok(DiagonalMetric::identity(rows, cols));
    }
    let v = problem.split_denominator(y).ok_or_else(|| {
        Error::InvalidParameter("scaling requested but the problem has no split-gradient denominator".into())
    })?;
    split_gradient_metric(y, &v, gamma)
}

/// One outer iteration with backtracking on the step size.
pub fn outer_step<P, O>(
    state: &SolverState,
    problem: &P,
    config: &SolverConfig,
    oracle: &O,
) -> Result<(SolverState, IterationRecord)>
where
    P: CompositeProblem + ?Sized,
    O: ProxOracle + ?Sized,
{
    let started = Instant::now();
    let k_next = state.k + 1;
    let epsilon = config.eps_schedule.epsilon(k_next);
    let gamma = if config.metric_enabled {
        gamma_k(&config.gamma_schedule, k_next)
    } else {
        1.0
    };
    let gamma_prev = if config.metric_enabled {
        gamma_k(&config.gamma_schedule, state.k)
    } else {
        1.0
    };
    let first_trial = state.tau / config.delta;
    let mut warm = state.warm_dual.clone();
    let mut total_inner = 0;
    let mut last_record = None;

    for i in 0..=config.max_backtracks {
        let tau = first_trial * config.rho.powi(i as i32);
        let t_next = t_update(state.t, state.tau, tau);
        let y = extrapolate(state, t_next)?;
        let metric = build_metric(problem, config, &y, gamma)?;
        let grad_y = problem.f_gradient(&y)?;
        let ybar = y.zip_map(&grad_y.zip_map(metric.diagonal(), |g, d| g / d)?, |a, b| a - tau * b)?;

        let cert = oracle.solve(
            &ProxRequest {
                ybar: &ybar,
                tau,
                metric: &metric,
                lambda: problem.tv_weight(),
                epsilon,
                max_inner: config.max_inner,
            },
            warm.as_ref(),
        )?;
        total_inner += cert.inner_iters;

        let x_next = cert.x;
        let bregman = problem.f_bregman(&x_next, &y, &grad_y)?;
        let quad_bound = laws::quadratic_bound(&x_next, &y, &metric, tau)?;
        let accepted = bregman <= quad_bound;
        let value = problem.objective(&x_next);

        let effective_eps = epsilon.max(cert.gap);
        let lemma = laws::descent_lemma_sides(
            &x_next,
            &y,
            &state.x_curr,
            value.total,
            state.objective,
            bregman,
            tau,
            &metric,
            effective_eps,
        )?;

        let record = IterationRecord {
            k: k_next,
            objective: value.total,
            tau,
            tau_prev: state.tau,
            t: t_next,
            t_prev: state.t,
            l_estimate: 1.0 / tau,
            l_average: f64::NAN,
            backtracks: i,
            inner_iters: cert.inner_iters,
            total_inner_iters: total_inner,
            epsilon,
            gap: cert.gap,
            prox_converged: cert.converged,
            gamma,
            bregman,
            quad_bound,
            bt_condition_satisfied: accepted,
            descent_lemma_ok: lemma.holds(),
            loewner_ok: loewner_chain_check(&state.metric, &metric, gamma_prev * gamma - 1.0)?,
            elapsed_s: started.elapsed().as_secs_f64(),
        };
        warm = Some(cert.w);

        if accepted {
            let next = SolverState {
                x_prev: state.x_curr.clone(),
                x_curr: x_next,
                t: t_next,
                tau,
                metric,
                k: k_next,
                warm_dual: warm,
                objective: value.total,
            };
            return Ok((next, record));
        }
        last_record = Some(record);
    }
    Err(Error::BacktrackExhausted {
        last: Box::new(last_record.expect("at least one trial runs")),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    IterationBudget,
    Stagnation,
    TimeBudget,
}

#[derive(Clone, Debug)]
pub struct RunOutput {
    pub x: ImageGrid,
    pub trace: Vec<IterationRecord>,
    pub stop: StopReason,
}

/// Runs up to `config.max_outer` iterations from `x0` with the dual-ascent proximal oracle.
pub fn run<P: CompositeProblem + ?Sized>(problem: &P, config: &SolverConfig, x0: &ImageGrid) -> Result<RunOutput> {
    run_with_oracle(problem, config, x0, &DualAscentProx)
}

pub fn run_with_oracle<P, O>(problem: &P, config: &SolverConfig, x0: &ImageGrid, oracle: &O) -> Result<RunOutput>
where
    P: CompositeProblem + ?Sized,
    O: ProxOracle + ?Sized,
{
    let started = Instant::now();
    let mut state = SolverState::initial(problem, config, x0)?;
    let mut trace = Vec::with_capacity(config.max_outer);
    let mut sqrt_tau_sum = config.tau0.sqrt();
    let mut stop = StopReason::IterationBudget;

    while state.k < config.max_outer {
        let previous = state.objective;
        let (next, mut record) = outer_step(&state, problem, config, oracle)?;
        sqrt_tau_sum += record.tau.sqrt();
        let root = (record.k + 1) as f64 / sqrt_tau_sum;
        record.l_average = root * root;
        record.elapsed_s = started.elapsed().as_secs_f64();
        trace.push(record);
        state = next;

        if let Some(tol) = config.rel_tol {
            if (state.objective - previous).abs() <= tol * previous.abs() {
                stop = StopReason::Stagnation;
                break;
            }
        }
        if let Some(budget) = config.time_budget {
            if started.elapsed() >= budget {
                stop = StopReason::TimeBudget;
                break;
            }
        }
    }
    Ok(RunOutput {
        x: state.x_curr,
        trace,
        stop,
    })
}
