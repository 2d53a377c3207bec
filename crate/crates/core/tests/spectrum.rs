use approx::assert_relative_eq;
use mg_core::spectrum::{
    characteristic, diffusive_lower_bound, diffusive_sweep, f_continued_fraction, g_closed_form, growth_bound_constant,
    optimal_diffusive_mode, solve_growth_rate, solve_growth_rate_diffusive, truncated_matrix_eigenvalue, ModeParams,
    DEFAULT_DEPTH,
};
use mg_core::{MgError, PhysicalParams};
use proptest::prelude::*;

fn unit_mode() -> ModeParams {
    ModeParams::unit(1.0, 1, 1, 1).unwrap()
}

#[test]
fn alpha_hand_values_and_growth() {
    let mp = unit_mode();
    assert_eq!(mp.alpha(1), 13.0);
    assert_eq!(mp.alpha(2), 97.0);
    let mp = ModeParams::unit(2.0, 3, 4, 1).unwrap();
    for p in 1..10_000 {
        assert!(mp.alpha(p + 1) > mp.alpha(p));
    }
    let q = |p: usize| mp.alpha(p) / (p as f64).powi(4);
    assert!((q(1000) - q(10_000)).abs() <= 1e-3 * q(10_000));
    let limit = 8.0 * 3f64.powi(4) / (2.0 * 3.0 * 1.0 * 17.0);
    assert_relative_eq!(q(10_000), limit, max_relative = 1e-6);
}

#[test]
fn g_closed_form_limits() {
    let mp = unit_mode();
    for p in 1..6 {
        assert_relative_eq!(g_closed_form(p, 2.0 / mp.alpha(p), &mp).unwrap(), 1.0, max_relative = 1e-12);
    }
    assert!(matches!(g_closed_form(2, 1.0 / mp.alpha(2), &mp), Err(MgError::Domain(_))));
    let big = 1e6;
    let g = g_closed_form(3, big, &mp).unwrap();
    assert_relative_eq!(g, 1.0 / (big * mp.alpha(3)), max_relative = 1e-10);
    let sigma = 3.0 / mp.alpha(2);
    let g: Vec<f64> = (2..=5).map(|p| g_closed_form(p, sigma, &mp).unwrap()).collect();
    assert!(g.windows(2).all(|w| w[0] > w[1]));
    for (i, gp) in g.iter().enumerate() {
        let s = sigma * mp.alpha(i + 2);
        assert_relative_eq!(*gp, 1.0 / (s - gp), max_relative = 1e-13);
    }
}

#[test]
fn continued_fraction_bounds_and_depth() {
    for mp in [unit_mode(), ModeParams::unit(4.0, 2, 1, 4).unwrap()] {
        for factor in [1.01, 2.0, 50.0] {
            let sigma = factor * 2.0 / mp.alpha(2);
            for p in 2..=64 {
                let f = f_continued_fraction(p, sigma, &mp, DEFAULT_DEPTH + p, 0.0).unwrap();
                let g = g_closed_form(p, sigma, &mp).unwrap();
                // G − F is O((σα_p)^{-2}) relative, below rounding for large p.
                assert!(1.0 / (sigma * mp.alpha(p)) < f && f <= g * (1.0 + 2.0 * f64::EPSILON), "p {p}: {f} vs G {g}");
                if p <= 8 {
                    assert!(f < g);
                }
            }
            for depth in [24, 40, 64] {
                let a = f_continued_fraction(2, sigma, &mp, depth, 0.0).unwrap();
                let b = f_continued_fraction(2, sigma, &mp, depth + 8, 0.0).unwrap();
                assert!((a - b).abs() <= 1e-14 * b, "depth {depth}");
            }
        }
    }
    assert!(f_continued_fraction(5, 1.0, &unit_mode(), 8, 0.0).is_err());
}

#[test]
fn unit_root_in_the_paper_bracket() {
    let m = solve_growth_rate(&unit_mode()).unwrap();
    assert_relative_eq!(m.bracket_lo(), 1.0 / 1261f64.sqrt(), max_relative = 1e-15);
    assert_relative_eq!(m.bracket_hi(), 1.0 / 1092f64.sqrt(), max_relative = 1e-15);
    assert!((m.bracket_lo() - 0.028161).abs() < 5e-7 && (m.bracket_hi() - 0.030261).abs() < 5e-7);
    assert!(m.bracket_lo() < m.sigma && m.sigma < m.bracket_hi());
    assert!(m.residual <= 1e-12 * 13.0);
    assert_eq!(m.c_tilde[0], 13.0);
}

#[test]
fn eigenvector_structure() {
    let m = solve_growth_rate(&unit_mode()).unwrap();
    let mp = m.params;
    for (i, r) in m.recurrence_residuals().iter().enumerate() {
        assert!(*r <= 1e-12, "row {} residual {r}", i + 1);
    }
    for (i, eta) in m.eta.iter().enumerate() {
        let p = i + 2;
        let s = m.sigma * mp.alpha(p);
        assert!(*eta < -1.0 / s || eta.abs() * s - 1.0 < 1e-15, "eta_{p} = {eta}");
        if s > 2.0 {
            assert!(*eta > -2.0 / (s + (s * s - 4.0).sqrt()));
        }
    }
    // c̃_p = α_p η_p ⋯ η_2 in log form.
    let mut ln = 0.0;
    for p in 2..=m.truncation_p {
        ln += m.eta[p - 2].abs().ln();
        let expected = (mp.alpha(p).ln() + ln) / std::f64::consts::LN_10;
        assert!((m.c_tilde_log10[p - 1] - expected).abs() <= 1e-10 * expected.abs().max(1.0));
    }
    // Superfactorial decay: |c̃_{p+1}/c̃_p| ≈ 1/(σα_p), i.e. C^p/((p−1)!)⁴.
    let mut predicted = m.c_tilde_log10[0];
    for p in 1..m.truncation_p {
        predicted -= (m.sigma * mp.alpha(p)).log10();
        let actual = m.c_tilde_log10[p];
        assert!((actual - predicted).abs() <= 1.0, "p = {}: {actual} vs {predicted}", p + 1);
    }
    let drop = m
        .c_tilde_log10
        .iter()
        .position(|l| l - m.c_tilde_log10[0] < -300.0)
        .expect("decays below 1e-300");
    assert!((55..=70).contains(&(drop + 1)), "decays at p = {}", drop + 1);
    assert!(m.c_tilde_log10[39] - m.c_tilde_log10[0] < -140.0);
    let unit = m.unit_coefficients();
    assert_relative_eq!(unit.iter().map(|c| c * c).sum::<f64>(), 1.0, max_relative = 1e-14);
}

#[test]
fn growth_bound_constant_values() {
    let p = PhysicalParams::default();
    assert_relative_eq!(growth_bound_constant(1.0, 1.0, &p), 1.0 / 258.0, max_relative = 1e-15);
    assert_relative_eq!(
        growth_bound_constant(2.0, 3.0, &p),
        2.0 * growth_bound_constant(1.0, 3.0, &p),
        max_relative = 1e-15
    );
    let big = growth_bound_constant(1.0, 1e6, &p) * 1e6;
    assert_relative_eq!(big, 1.0 / 256.0, max_relative = 1e-9);
}

#[test]
fn square_family_exceeds_the_linear_bound() {
    for (a, m) in [(1.0, 1), (2.0, 1), (1.0, 2), (3.0, 3)] {
        let c = growth_bound_constant(a, m as f64, &PhysicalParams::default());
        for j in [1i64, 4, 9, 16, 25, 36, 49, 64, 81, 100] {
            if j < m {
                continue;
            }
            let k2 = (j as f64).sqrt() as i64;
            let mp = ModeParams::unit(a, m, j, k2).unwrap();
            let s = solve_growth_rate(&mp).unwrap().sigma;
            assert!(s > j as f64 * c, "a {a} m {m} j {j}: {s}");
        }
    }
}

#[test]
fn oracle_truncation_study() {
    for mp in [unit_mode(), ModeParams::unit(2.0, 1, 4, 2).unwrap()] {
        let cf = solve_growth_rate(&mp).unwrap().sigma;
        let p64 = truncated_matrix_eigenvalue(&mp, 0.0, 64).unwrap();
        let p128 = truncated_matrix_eigenvalue(&mp, 0.0, 128).unwrap();
        assert!((p64 - p128).abs() <= 1e-10 * cf);
        assert!((cf - p128).abs() <= 1e-8 * cf);
    }
    assert!(truncated_matrix_eigenvalue(&unit_mode(), 0.0, 4).is_err());
}

#[test]
fn diffusive_limit_and_monotonicity() {
    let mp = ModeParams::unit(2.0, 1, 2, 1).unwrap();
    let s0 = solve_growth_rate(&mp).unwrap().sigma;
    let mut last = 0.0;
    for kappa in [1e-2, 3e-3, 1e-3, 1e-4, 1e-5, 1e-7] {
        let s = solve_growth_rate_diffusive(&mp, kappa).unwrap().unwrap().sigma;
        assert!(s < s0 && s > last, "kappa {kappa}: {s}");
        last = s;
    }
    assert!((s0 - last) / s0 < 1e-5);
    let kappas = [0.0, 1e-4, 1e-3, 3e-3, 1e-2];
    let rates: Vec<f64> = kappas
        .iter()
        .map(|k| if *k == 0.0 { s0 } else { solve_growth_rate_diffusive(&mp, *k).unwrap().unwrap().sigma })
        .collect();
    assert!(rates.windows(2).all(|w| w[0] > w[1]));
}

#[test]
fn strong_diffusion_has_no_root() {
    for mp in [unit_mode(), ModeParams::unit(4.0, 2, 3, 2).unwrap()] {
        let s0 = solve_growth_rate(&mp).unwrap().sigma;
        let kappa = s0 / (mp.horizontal_sq() + (mp.m * mp.m) as f64);
        assert!(solve_growth_rate_diffusive(&mp, kappa).unwrap().is_none());
        assert!(solve_growth_rate_diffusive(&mp, 10.0 * kappa).unwrap().is_none());
    }
}

#[test]
fn diffusive_root_exceeds_the_lower_bound() {
    let phys = PhysicalParams::default();
    let mut checked = 0;
    for &(a, k1, k2, kappa) in &[(4.0, 8, 3, 1e-3), (4.0, 16, 4, 1e-3), (8.0, 20, 6, 1e-3), (4.0, 4, 2, 1e-2)] {
        let mp = ModeParams::new(a, 1, k1, k2, phys).unwrap();
        let bound = diffusive_lower_bound(&mp, kappa);
        let s = solve_growth_rate_diffusive(&mp, kappa).unwrap();
        if bound > 0.0 {
            checked += 1;
            assert!(s.unwrap().sigma > bound);
        }
    }
    assert!(checked >= 2);
}

#[test]
fn diffusive_oracle_agreement() {
    for (mp, kappa) in [
        (unit_mode(), 1e-3),
        (ModeParams::unit(4.0, 1, 8, 3).unwrap(), 1e-2),
        (ModeParams::unit(4.0, 1, 12, 7).unwrap(), 1e-2),
    ] {
        let cf = solve_growth_rate_diffusive(&mp, kappa).unwrap().unwrap();
        let mat = truncated_matrix_eigenvalue(&mp, kappa, 128).unwrap();
        assert!((cf.sigma - mat).abs() <= 1e-7 * cf.sigma, "{} vs {mat}", cf.sigma);
        assert!(cf.recurrence_residuals().iter().all(|r| *r <= 1e-10));
        assert!(characteristic(cf.sigma, &mp, kappa).unwrap().abs() <= 1e-12 * mp.alpha(1));
    }
}

#[test]
fn dynamo_optimum_small_kappa() {
    let phys = PhysicalParams::default();
    let opt = optimal_diffusive_mode(1e-2, 4.0, 1, &phys, 64, 32).unwrap();
    assert!(opt.meets_dynamo_bound);
    assert!(opt.mode.sigma >= 16.0 / (1024.0 * 1e-2));
    assert!((opt.k1 as f64 / opt.k1_predicted).max(opt.k1_predicted / opt.k1 as f64) <= 2.0);
    assert!((opt.k2 as f64 / opt.k2_predicted).max(opt.k2_predicted / opt.k2 as f64) <= 2.0);
    assert!(matches!(
        optimal_diffusive_mode(1e-2, 4.0, 1, &phys, 20, 20),
        Err(MgError::InvalidArgument(_))
    ));
    let sweep = diffusive_sweep(1e-2, 4.0, 1, &phys, 6, 5).unwrap();
    assert_eq!(sweep.len(), 30);
    assert!(sweep.windows(2).all(|w| (w[0].k1, w[0].k2) < (w[1].k1, w[1].k2)));
}

#[test]
fn mode_serialises_with_documented_keys() {
    let m = solve_growth_rate(&unit_mode()).unwrap();
    let v = serde_json::to_value(&m).unwrap();
    for key in ["params", "kappa", "sigma", "bracket", "residual", "P", "eta", "c_tilde", "c_tilde_log10"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert_eq!(v["P"].as_u64().unwrap() as usize, m.truncation_p);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn root_inside_bracket(a in 0.25f64..16.0, m in 1i64..6, k1 in 1i64..40, k2 in 1i64..40) {
        let mp = ModeParams::unit(a, m, k1, k2).unwrap();
        let mode = solve_growth_rate(&mp).unwrap();
        prop_assert!(mode.bracket_lo() < mode.sigma && mode.sigma < mode.bracket_hi());
        prop_assert!(mode.residual <= 1e-12 * mp.alpha(1));
        prop_assert!(mode.recurrence_residuals().iter().all(|r| *r <= 1e-12));
    }

    #[test]
    fn alpha_increasing(a in 0.1f64..10.0, m in 1i64..8, k1 in 1i64..100, k2 in 1i64..100,
                        om in 0.2f64..5.0, mu in 0.2f64..5.0) {
        let phys = PhysicalParams::from_mu(om, mu, 0.0).unwrap();
        let mp = ModeParams::new(a, m, k1, k2, phys).unwrap();
        for p in 1..200 {
            prop_assert!(mp.alpha(p + 1) > mp.alpha(p));
        }
    }

    #[test]
    fn diffusion_lowers_the_rate(k1 in 1i64..12, k2 in 1i64..12, kappa in 1e-5f64..1e-2) {
        let mp = ModeParams::unit(4.0, 1, k1, k2).unwrap();
        let s0 = solve_growth_rate(&mp).unwrap().sigma;
        if let Some(mode) = solve_growth_rate_diffusive(&mp, kappa).unwrap() {
            prop_assert!(mode.sigma > 0.0 && mode.sigma < s0);
            let b = diffusive_lower_bound(&mp, kappa);
            prop_assert!(b <= 0.0 || mode.sigma > b);
        }
    }
}
