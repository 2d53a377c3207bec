use approx::assert_relative_eq;
use mg_core::evolution::{analytic_window, NonlinearConfig, NonlinearSolver, Transform3};
use mg_core::gevrey::{
    breakdown_criterion, criterion_report, gevrey_norm, positivity_condition, radius_estimate, radius_ode_linear,
    radius_ode_refined, sobolev_a, GevreyTracker,
};
use mg_core::{MgError, PhysicalParams, SpectralField};
use num_complex::Complex64;
use proptest::prelude::*;

fn synthetic(n: usize, tau0: f64, q: f64) -> SpectralField {
    SpectralField::from_fn(3, n, |k| {
        let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
        if kn == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            Complex64::new((-tau0 * kn).exp() * kn.powf(-q), 0.0)
        }
    })
}

#[test]
fn radius_recovered_on_synthetic_spectra() {
    for tau0 in [0.1, 0.5, 2.0] {
        for q in [0.0, 2.0, 4.0] {
            let est = radius_estimate(&synthetic(64, tau0, q)).unwrap();
            assert!(!est.entire);
            let err = (est.tau - tau0).abs() / tau0;
            assert!(err <= 0.05, "tau0 {tau0} q {q}: estimate {} ({} shells)", est.tau, est.shells_used);
        }
    }
}

#[test]
fn power_law_has_no_radius() {
    let est = radius_estimate(&synthetic(32, 0.0, 4.0)).unwrap();
    assert!(est.tau <= 0.02, "{}", est.tau);
}

#[test]
fn trigonometric_polynomial_is_entire() {
    let mut f = SpectralField::zeros(3, 16);
    f.set_hermitian(&[1, 2, 3], Complex64::new(1.0, 0.5)).unwrap();
    f.set_hermitian(&[-4, 0, 1], Complex64::new(0.0, 0.1)).unwrap();
    let est = radius_estimate(&f).unwrap();
    assert!(est.entire && est.tau.is_infinite());
    assert!(matches!(radius_estimate(&f.zeros_like()), Err(MgError::InsufficientData(_))));
}

#[test]
fn single_pair_norms() {
    let c = 0.37;
    let mut f = SpectralField::zeros(3, 4);
    f.set_hermitian(&[1, 1, 1], Complex64::new(0.0, c)).unwrap();
    let k = 3f64.sqrt();
    assert_relative_eq!(sobolev_a(&f), 2.0 * 3f64.powf(0.75) * c, max_relative = 1e-14);
    for (tau, r) in [(0.0, 0.0), (0.7, 2.5), (3.0, 4.0)] {
        let expected = 2f64.sqrt() * k.powf(r) * (tau * k).exp() * c;
        assert_relative_eq!(gevrey_norm(&f, tau, r).unwrap(), expected, max_relative = 1e-13);
    }
    assert_eq!(sobolev_a(&f.zeros_like()), 0.0);
    let mut g = SpectralField::zeros(3, 4);
    g.set_hermitian(&[0, 2, -3], Complex64::new(0.2, 0.1)).unwrap();
    let mut sum = f.clone();
    sum.axpy(1.0, &g);
    assert_relative_eq!(sobolev_a(&sum), sobolev_a(&f) + sobolev_a(&g), max_relative = 1e-14);
}

#[test]
fn overflow_names_the_shell() {
    let f = synthetic(8, 0.0, 0.0);
    match gevrey_norm(&f, 1e3, 3.5) {
        Err(MgError::Overflow { shell }) => assert_relative_eq!(shell, (192f64).sqrt(), max_relative = 1e-12),
        other => panic!("expected overflow, got {other:?}"),
    }
}

#[test]
fn norm_diverges_with_truncation_beyond_the_radius() {
    let r = 1.0;
    let mk = |n: usize| {
        SpectralField::from_fn(3, n, |k| {
            let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
            if kn == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                Complex64::new((-0.5 * kn).exp() / kn.powf(r + 1.0), 0.0)
            }
        })
    };
    let (small, large) = (mk(12), mk(24));
    let below = |f: &SpectralField| gevrey_norm(f, 0.3, r).unwrap();
    let above = |f: &SpectralField| gevrey_norm(f, 0.8, r).unwrap();
    assert!((below(&large) - below(&small)) / below(&large) < 0.05);
    assert!(above(&large) > 10.0 * above(&small));
    assert!(gevrey_norm(&large, 0.4, r).unwrap() > gevrey_norm(&large, 0.3, r).unwrap());
}

#[test]
fn parseval_against_physical_space() {
    let n = 6;
    let mut f = SpectralField::zeros(3, n);
    for (k, c) in [([1, 2, 3], (0.4, -0.1)), ([-2, 0, 1], (0.0, 0.3)), ([5, -5, 2], (1e-3, 2e-3)), ([0, 1, -6], (0.2, 0.2))] {
        f.set_hermitian(&k, Complex64::new(c.0, c.1)).unwrap();
    }
    let grid = 2 * n + 2;
    let tr = Transform3::new(grid);
    let mut data = vec![Complex64::new(0.0, 0.0); grid * grid * grid];
    for (i, c) in f.coeffs().iter().enumerate() {
        data[tr.slot(f.index_to_k(i))] = *c;
    }
    tr.to_grid(&mut data);
    let phys = (data.iter().map(|v| v.norm_sqr()).sum::<f64>() / data.len() as f64).sqrt();
    assert_relative_eq!(gevrey_norm(&f, 0.0, 0.0).unwrap(), phys, max_relative = 1e-12);
    assert_relative_eq!(f.l2_norm(), phys, max_relative = 1e-12);
}

#[test]
fn linear_radius_law() {
    let (tau0, k0, c) = (1.5, 0.8, 2.0);
    let (_, t_star) = radius_ode_linear(tau0, k0, c, 0.0);
    assert_relative_eq!(t_star, tau0 / (2.0 * c * k0));
    assert_eq!(radius_ode_linear(tau0, k0, c, 0.0).0, tau0);
    assert!(radius_ode_linear(tau0, k0, c, t_star).0.abs() < 1e-15);
    assert_relative_eq!(radius_ode_linear(tau0, k0, c, t_star / 2.0).0, tau0 / 2.0, max_relative = 1e-15);
}

fn tracker_with(a: impl Fn(f64) -> f64, tau0: f64, k0: f64, c_r: f64, h: f64, t_end: f64) -> GevreyTracker {
    let mut tr = GevreyTracker::new(tau0, k0, 3.5, c_r, 2.0 * h).unwrap();
    let steps = (t_end / h).round() as usize;
    for i in 0..=steps {
        let t = i as f64 * h;
        tr.push(t, a(t)).unwrap();
    }
    tr
}

#[test]
fn refined_radius_without_forcing_is_exponential() {
    for c_r in [0.5, 1.0, 2.0] {
        let tr = tracker_with(|_| 0.0, 1.2, 0.7, c_r, 0.01, 3.0);
        for t in [0.0, 0.5, 1.234, 3.0] {
            let expected = 1.2 * (-2.0 * c_r * 0.7 * t).exp();
            assert!((radius_ode_refined(&tr, t).unwrap() - expected).abs() <= 1e-12 * 1.2);
        }
        assert!(breakdown_criterion(&tr, 3.0).unwrap());
    }
}

#[test]
fn refined_radius_solves_its_ode() {
    let a = |t: f64| 0.3 + 0.2 * (3.0 * t).sin();
    let (c_r, k0) = (1.0, 0.5);
    let h = 1e-3;
    let tr = tracker_with(a, 2.0, k0, c_r, h, 1.0);
    for &t in &[0.2, 0.5, 0.8] {
        let d = 0.01;
        let dtau = (radius_ode_refined(&tr, t + d).unwrap() - radius_ode_refined(&tr, t - d).unwrap()) / (2.0 * d);
        let tau = radius_ode_refined(&tr, t).unwrap();
        let idx = (t / h).round() as usize;
        let big_a = tr.big_a()[idx];
        let residual = dtau + 3.0 * c_r * a(t) + 2.0 * c_r * k0 * tau * (-c_r * big_a).exp();
        // Central difference O(d²) plus trapezoid O(h²).
        assert!(residual.abs() < 1e-4, "t {t}: residual {residual}");
    }
}

#[test]
fn criterion_behaviour() {
    let tr = tracker_with(|_| 0.0, 0.1, 1.0, 1.0, 0.05, 5.0);
    assert!(breakdown_criterion(&tr, 5.0).unwrap());
    let bounded = |t: f64| 1.0 / (1.0 + t);
    let tr = tracker_with(bounded, 1e6, 1.0, 1.0, 0.05, 5.0);
    assert!(breakdown_criterion(&tr, 5.0).unwrap());
    let spike = |t: f64| if (1.0..1.5).contains(&t) { 50.0 } else { 0.01 };
    let tr = tracker_with(spike, 1.0, 1.0, 1.0, 0.01, 3.0);
    assert!(breakdown_criterion(&tr, 0.5).unwrap());
    assert!(!breakdown_criterion(&tr, 2.0).unwrap());
    let rep = criterion_report(&tr, 2.0).unwrap();
    assert!(rep.refined_tau <= 0.0 && !rep.positivity_condition);
    assert!(!rep.criterion_vs_radius_disagree);
}

#[test]
fn positivity_condition_guarantees_a_positive_radius() {
    for level in [0.01, 0.05, 0.1, 0.3, 1.0] {
        let tr = tracker_with(|t| level * (1.0 + t), 1.0, 0.4, 1.0, 0.01, 2.0);
        for t in [0.5, 1.0, 1.5, 2.0] {
            if positivity_condition(&tr, t).unwrap() {
                assert!(radius_ode_refined(&tr, t).unwrap() > 0.0);
            }
        }
    }
}

#[test]
fn tracker_invariants_and_errors() {
    let tr = tracker_with(|t| (5.0 * t).cos().abs(), 0.8, 1.0, 1.0, 0.02, 2.0);
    assert!(tr.big_a().windows(2).all(|w| w[1] >= w[0]));
    assert!(tr.tau().windows(2).all(|w| w[1] <= w[0]));
    assert_eq!(tr.big_a()[0], 0.0);
    assert!(tr.tau().iter().all(|t| *t >= 0.0));
    assert!(matches!(radius_ode_refined(&tr, 3.0), Err(MgError::Sampling(_))));
    let mut sparse = GevreyTracker::new(1.0, 1.0, 3.5, 1.0, 0.1).unwrap();
    sparse.push(0.0, 1.0).unwrap();
    sparse.push(0.5, 1.0).unwrap();
    assert!(matches!(radius_ode_refined(&sparse, 0.4), Err(MgError::Sampling(_))));
    assert!(matches!(sparse.push(0.5, 1.0), Err(MgError::Sampling(_))));
    let mut csv = Vec::new();
    tr.write_csv(&mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("t,a,A,tau\n"));
    assert_eq!(text.lines().count(), tr.times().len() + 1);
}

#[test]
fn tracker_from_field_checks_the_exponent() {
    let f = synthetic(6, 1.0, 0.0);
    assert!(GevreyTracker::from_field(&f, 0.5, 3.0, 1.0, 0.1).is_err());
    let tr = GevreyTracker::from_field(&f, 0.5, 3.5, 1.0, 0.1).unwrap();
    assert_relative_eq!(tr.k0, gevrey_norm(&f, 0.5, 3.5).unwrap());
    assert_relative_eq!(tr.a_samples()[0], sobolev_a(&f));
}

/// Non-diffusive run inside the analytic window: the Gevrey norm at the
/// linearly shrinking radius never exceeds its initial value.
#[test]
fn gevrey_norm_controlled_inside_the_window() {
    let n = 8;
    let mut theta = SpectralField::zeros(3, n);
    for (k, c) in [([1, 0, 1], (0.0, -0.05)), ([0, 1, 2], (0.03, 0.0)), ([1, 1, -1], (0.02, 0.01))] {
        theta.set_hermitian(&k, Complex64::new(c.0, c.1)).unwrap();
    }
    let (c_r, r) = (1.0, 3.5);
    let w = analytic_window(&theta, c_r, r).unwrap();
    let t_end = 0.9 * w.t_star;
    let steps = 60;
    let mut cfg = NonlinearConfig::new(PhysicalParams::default(), t_end / steps as f64, t_end);
    cfg.c_r = c_r;
    cfg.r = r;
    cfg.estimate_radius = false;
    let mut solver = NonlinearSolver::new(&theta, &theta.zeros_like(), &cfg).unwrap();
    for _ in 0..steps {
        solver.step().unwrap();
        let (tau, _) = radius_ode_linear(w.tau0, w.k0, c_r, solver.time());
        let norm = gevrey_norm(&solver.state(), tau, r).unwrap();
        assert!(norm <= w.k0 * (1.0 + 1e-12), "t {}: {norm} > {}", solver.time(), w.k0);
    }
    let mut long = cfg.clone();
    long.t_end = 1.1 * w.t_star;
    assert!(matches!(
        NonlinearSolver::new(&theta, &theta.zeros_like(), &long),
        Err(MgError::AnalyticWindow { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn gevrey_norm_monotone(seed in 0u64..1000, t1 in 0.0f64..2.0, dt in 0.0f64..1.0, r1 in 0.0f64..4.0, dr in 0.0f64..2.0) {
        let f = SpectralField::from_fn(3, 4, |k| {
            let h = (k[0] * 31 + k[1] * 17 + k[2] * 7 + seed as i64) as f64;
            if k == [0, 0, 0] { Complex64::new(0.0, 0.0) } else { Complex64::new(h.sin(), h.cos()) }
        });
        let base = gevrey_norm(&f, t1, r1).unwrap();
        prop_assert!(gevrey_norm(&f, t1 + dt, r1).unwrap() >= base * (1.0 - 1e-14));
        prop_assert!(gevrey_norm(&f, t1, r1 + dr).unwrap() >= base * (1.0 - 1e-14));
    }
}
