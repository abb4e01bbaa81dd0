use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sfista_core::linops::{psf_to_spectrum, GaussianPsf};
use sfista_core::metrics::DiagonalMetric;
use sfista_core::problems::{
    kl_gradient, lf_estimate, CompositeProblem, Background, PoissonDeblurProblem, SeparableQuadratic,
};
use sfista_core::prox::{inexact_prox, EpsilonSchedule, ProxRequest};
use sfista_core::solver::{descent_lemma_probe, run, t_identity_residual, SolverConfig};
use sfista_core::ImageGrid;

fn small_poisson(lambda: f64, seed: u64) -> PoissonDeblurProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (rows, cols) = (16, 16);
    let op = psf_to_spectrum(&GaussianPsf::new(1.0).unwrap(), rows, cols).unwrap();
    let data = ImageGrid::from_fn(rows, cols, |r, c| {
        let base = if (4..12).contains(&r) && (5..11).contains(&c) { 60.0 } else { 8.0 };
        (base + rng.random_range(-3.0f64..3.0)).round()
    });
    PoissonDeblurProblem::new(op, Background::Uniform(2.0), data, lambda).unwrap()
}

#[test]
fn quadratic_with_exact_step_never_backtracks() {
    let l = 3.0;
    let center = ImageGrid::from_fn(6, 6, |r, c| (r * 6 + c) as f64 / 4.0);
    let problem = SeparableQuadratic {
        curvature: l,
        center,
        lambda: 0.05,
    };
    let mut cfg = SolverConfig::new(1.0, 1.0 / l).unwrap();
    cfg.max_outer = 50;
    let out = run(&problem, &cfg, &ImageGrid::zeros(6, 6)).unwrap();
    assert!(out.trace.iter().all(|r| r.backtracks == 0));
    assert!(out.trace.iter().all(|r| r.tau == 1.0 / l));
}

#[test]
fn armijo_steps_are_monotone_and_adaptive_steps_can_grow() {
    let problem = small_poisson(0.01, 1);
    let lf = lf_estimate(&problem).unwrap();
    let x0 = problem.data().clone();

    let mut armijo = SolverConfig::new(1.0, 100.0 / lf).unwrap();
    armijo.max_outer = 60;
    let out = run(&problem, &armijo, &x0).unwrap();
    assert!(out.trace.windows(2).all(|w| w[1].tau <= w[0].tau));

    let mut adaptive = SolverConfig::new(0.98, 100.0 / lf).unwrap();
    adaptive.max_outer = 60;
    let out = run(&problem, &adaptive, &x0).unwrap();
    assert!(out.trace.windows(2).any(|w| w[1].tau > w[0].tau));
    for r in &out.trace {
        let hi = r.tau_prev / adaptive.delta;
        let lo = hi * adaptive.rho.powi(adaptive.max_backtracks as i32);
        assert!(r.tau <= hi * (1.0 + 1e-15) && r.tau >= lo * (1.0 - 1e-15));
        assert!(t_identity_residual(r.t_prev, r.tau_prev, r.tau, r.t) <= 1e-12);
        assert!(r.bt_condition_satisfied && r.bregman <= r.quad_bound);
    }
}

/// Plain projected FISTA with constant step `1 / L`, momentum `(t_k - 1) / t_{k+1}` from `t_0 = 1`.
fn textbook_fista(problem: &PoissonDeblurProblem, x0: &ImageGrid, l: f64, iters: usize) -> ImageGrid {
    let mut x = x0.clone();
    let mut x_prev = x0.clone();
    let mut t: f64 = 1.0;
    for _ in 0..iters {
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let beta = (t - 1.0) / t_next;
        let y = x.zip_map(&x_prev, |a, b| (a + beta * (a - b)).max(0.0)).unwrap();
        let g = kl_gradient(problem, &y).unwrap();
        x_prev = x;
        x = y.axpy(-1.0 / l, &g).unwrap().map(|v| v.max(0.0));
        t = t_next;
    }
    x
}

#[test]
fn unregularized_run_reproduces_textbook_fista() {
    let problem = small_poisson(0.0, 2);
    let lf = lf_estimate(&problem).unwrap();
    let x0 = problem.data().clone();
    let mut cfg = SolverConfig::new(1.0, 1.0 / lf).unwrap();
    cfg.max_outer = 100;
    let ours = run(&problem, &cfg, &x0).unwrap();
    assert!(ours.trace.iter().all(|r| r.backtracks == 0));
    let theirs = textbook_fista(&problem, &x0, lf, 100);
    let a = problem.objective(&ours.x).total;
    let b = problem.objective(&theirs).total;
    assert!((a - b).abs() <= 1e-6 * b.abs(), "{a} vs {b}");
}

#[test]
fn epsilon_column_follows_schedule_exactly() {
    let problem = small_poisson(0.02, 3);
    let lf = lf_estimate(&problem).unwrap();
    let mut cfg = SolverConfig::new(0.9, 1.0 / lf).unwrap();
    cfg.max_outer = 25;
    cfg.eps_schedule = EpsilonSchedule::geometric(0.5, 0.45).unwrap();
    let out = run(&problem, &cfg, problem.data()).unwrap();
    for r in &out.trace {
        assert_eq!(r.epsilon, cfg.eps_schedule.epsilon(r.k));
        if r.prox_converged {
            assert!(r.gap <= r.epsilon);
        }
    }
}

#[test]
fn descent_lemma_probe_detects_a_bad_point() {
    let problem = small_poisson(0.05, 4);
    let lf = lf_estimate(&problem).unwrap();
    let tau = 1.0 / lf;
    let (rows, cols) = problem.shape();
    let metric = DiagonalMetric::identity(rows, cols);
    let x_bar = problem.data().clone();
    let g = kl_gradient(&problem, &x_bar).unwrap();
    let ybar = x_bar.axpy(-tau, &g).unwrap();
    let eps = 1e-6;
    let cert = inexact_prox(
        &ProxRequest {
            ybar: &ybar,
            tau,
            metric: &metric,
            lambda: problem.lambda(),
            epsilon: eps,
            max_inner: 100_000,
        },
        None,
    )
    .unwrap();
    assert!(cert.converged);
    assert!(descent_lemma_probe(&cert.x, &x_bar, &x_bar, tau, &metric, eps, &problem).unwrap());
    assert!(descent_lemma_probe(&cert.x, &x_bar, &cert.x, tau, &metric, 0.0, &problem).unwrap());

    // Push the point far from the proximal point: its h-value now exceeds the optimum by much more than eps.
    let bad = cert.x.map(|v| v + 25.0);
    assert!(!descent_lemma_probe(&bad, &x_bar, &x_bar, tau, &metric, eps, &problem).unwrap());
}
