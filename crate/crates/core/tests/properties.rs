use proptest::prelude::*;
use sfista_core::linops::{psf_to_spectrum, GaussianPsf};
use sfista_core::metrics::{project_nonneg_scaled, split_gradient_metric, DiagonalMetric, GammaSchedule};
use sfista_core::problems::{lf_estimate, Background, CompositeProblem, PoissonDeblurProblem};
use sfista_core::solver::{descent_lemma_probe, t_identity_residual, t_update};
use sfista_core::ImageGrid;

const N: usize = 10;

fn grid(lo: f64, hi: f64) -> impl Strategy<Value = ImageGrid> {
    prop::collection::vec(lo..hi, N * N).prop_map(|v| ImageGrid::new(N, N, v).unwrap())
}

fn problem(data: ImageGrid) -> PoissonDeblurProblem {
    let op = psf_to_spectrum(&GaussianPsf::new(1.0).unwrap(), N, N).unwrap();
    PoissonDeblurProblem::new(op, Background::Uniform(1.5), data.map(f64::round), 0.0).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn split_metric_stays_in_band(y in grid(0.0, 50.0), v in grid(0.1, 3.0), gamma in 1.0f64..100.0) {
        let m = split_gradient_metric(&y, &v, gamma).unwrap();
        for &d in m.diagonal().iter() {
            prop_assert!(d >= 1.0 / gamma * (1.0 - 1e-15) && d <= gamma * (1.0 + 1e-15));
        }
    }

    #[test]
    fn metric_norm_is_sandwiched(d in grid(0.2, 5.0), x in grid(-3.0, 3.0)) {
        let (lo, hi) = (d.min(), d.max());
        let m = DiagonalMetric::new(d, lo, hi).unwrap();
        let n = m.norm_sq(&x).unwrap();
        let e = x.norm_sq();
        prop_assert!(n >= lo * e * (1.0 - 1e-12) && n <= hi * e * (1.0 + 1e-12));
    }

    #[test]
    fn projection_is_idempotent(d in grid(0.2, 5.0), x in grid(-3.0, 3.0)) {
        let (lo, hi) = (d.min(), d.max());
        let m = DiagonalMetric::new(d, lo, hi).unwrap();
        let p = project_nonneg_scaled(&m, &x).unwrap();
        prop_assert!(p.is_nonnegative());
        prop_assert_eq!(project_nonneg_scaled(&m, &p).unwrap(), p);
    }

    #[test]
    fn gamma_schedule_decreases_to_one(s1 in 0.0f64..1e4, s2 in 1.01f64..5.0, k in 0usize..10_000) {
        let g = GammaSchedule::new(s1, s2).unwrap();
        prop_assert!(g.gamma(k) >= 1.0);
        prop_assert!(g.gamma(k + 1) <= g.gamma(k));
    }

    #[test]
    fn t_update_identity(t in 1.0f64..1e4, a in 1e-3f64..10.0, b in 1e-3f64..10.0) {
        let next = t_update(t, a, b);
        prop_assert!(next >= 1.0);
        prop_assert!(t_identity_residual(t, a, b, next) <= 1e-12);
    }

    #[test]
    fn kl_is_convex_along_segments(data in grid(0.0, 80.0), a in grid(0.0, 60.0), b in grid(0.0, 60.0), s in 0.0f64..1.0) {
        let p = problem(data);
        let mid = a.scale(s).axpy(1.0 - s, &b).unwrap();
        let fa = p.f_value(&a).unwrap();
        let fb = p.f_value(&b).unwrap();
        let fm = p.f_value(&mid).unwrap();
        prop_assert!(fm <= s * fa + (1.0 - s) * fb + 1e-9 * (fa.abs() + fb.abs()));
    }

    #[test]
    fn bregman_is_dominated_by_global_lipschitz_bound(data in grid(0.0, 80.0), x in grid(0.0, 60.0), y in grid(0.0, 60.0)) {
        let p = problem(data);
        let lf = lf_estimate(&p).unwrap();
        let g = p.f_gradient(&y).unwrap();
        let breg = p.f_bregman(&x, &y, &g).unwrap();
        prop_assert!(breg >= -1e-9);
        prop_assert!(breg <= 0.5 * lf * x.sub(&y).unwrap().norm_sq() * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn exact_gradient_step_satisfies_descent_lemma(data in grid(1.0, 80.0), xref in grid(0.0, 60.0)) {
        // With no TV term the projected gradient step is the exact proximal-gradient point.
        let p = problem(data);
        let lf = lf_estimate(&p).unwrap();
        let tau = 1.0 / lf;
        let x_bar = p.data().clone();
        let g = p.f_gradient(&x_bar).unwrap();
        let x_tilde = x_bar.axpy(-tau, &g).unwrap().map(|v| v.max(0.0));
        let m = DiagonalMetric::identity(N, N);
        prop_assert!(descent_lemma_probe(&x_tilde, &x_bar, &xref, tau, &m, 0.0, &p).unwrap());
    }
}
