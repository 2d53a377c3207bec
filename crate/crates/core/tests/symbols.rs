use approx::assert_relative_eq;
use mg_core::symbols::{
    apply_multiplier, b_symbol, divergence_residual, exact, m_norm, m_symbol, measured_bound_constant,
    symbol_asymptotics_report, t_contraction_residual, t_reconstruction, t_symbol, velocity, PhysicalParams, Wavevector,
};
use mg_core::evolution::Transform3;
use mg_core::SpectralField;
use num_complex::Complex64;
use num_rational::Ratio;
use proptest::prelude::*;

fn unit() -> PhysicalParams {
    PhysicalParams::default()
}

#[test]
fn hand_evaluated_unit_symbol() {
    let m = m_symbol(Wavevector::new(1, 1, 1), &unit());
    assert_relative_eq!(m[0], 5.0 / 13.0, max_relative = 1e-15);
    assert_relative_eq!(m[1], -7.0 / 13.0, max_relative = 1e-15);
    assert_relative_eq!(m[2], 2.0 / 13.0, max_relative = 1e-15);
    let e = exact::m_symbol(Wavevector::new(1, 1, 1), 1, 1);
    assert_eq!(e, [Ratio::new(5, 13), Ratio::new(-7, 13), Ratio::new(2, 13)]);
}

#[test]
fn horizontal_plane_is_zero() {
    for p in [unit(), PhysicalParams::from_mu(3.0, 0.5, 0.0).unwrap()] {
        assert_eq!(m_symbol(Wavevector::new(3, 5, 0), &p), [0.0; 3]);
        let t = t_symbol(Wavevector::new(2, 1, 0), &p);
        assert!(t.iter().flatten().all(|c| c.norm() == 0.0));
        assert!(b_symbol(Wavevector::new(1, 1, 0), &p).iter().all(|c| c.norm() == 0.0));
    }
}

#[test]
fn t_column_and_magnetic_values() {
    let t = t_symbol(Wavevector::new(1, 1, 1), &unit());
    for row in &t {
        assert_relative_eq!(row[2].im, -(1.0 / 3.0) * (2.0 / 13.0), max_relative = 1e-15);
        assert_eq!(row[2].re, 0.0);
    }
    let b = b_symbol(Wavevector::new(1, 1, 1), &unit());
    for (bj, mj) in b.iter().zip([5.0, -7.0, 2.0]) {
        assert_relative_eq!(bj.im, mj / 39.0, max_relative = 1e-15);
    }
    assert!(b_symbol(Wavevector::new(4, 0, 3), &unit()).iter().all(|c| c.norm() == 0.0));
}

#[test]
fn exact_identities_on_a_box() {
    for (om, mu) in [(1, 1), (1, 2), (2, 1), (2, 2), (3, 7)] {
        for k1 in -6..=6 {
            for k2 in -6..=6 {
                for k3 in (-6..=6).filter(|v| *v != 0) {
                    let k = Wavevector::new(k1, k2, k3);
                    assert_eq!(exact::divergence(k, om, mu), Ratio::from_integer(0));
                    assert_eq!(exact::t_contraction(k, om, mu), Ratio::from_integer(0));
                }
            }
        }
    }
}

#[test]
fn asymptotic_ratios_stay_bounded() {
    let rows = symbol_asymptotics_report(0.5, 16..=4096, &unit()).unwrap();
    assert!(rows.len() >= 9);
    for j in 0..3 {
        let (lo, hi) = rows
            .iter()
            .map(|r| r.ratios[j])
            .fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(v), h.max(v)));
        assert!(lo > 0.0 && hi / lo < 10.0, "ratio {j} varies by {}", hi / lo);
    }
    let growth = rows.last().unwrap().m_abs[1] / rows[0].m_abs[1];
    assert!((128.0..=512.0).contains(&growth), "growth {growth}");
    assert!(symbol_asymptotics_report(0.5, 10..=5, &unit()).is_err());
}

#[test]
fn linear_bound_is_sharp_along_the_curve() {
    let p = unit();
    let c = measured_bound_constant(&p, 64);
    assert!(c.is_finite() && c > 0.0);
    let along = (2..=64)
        .map(|k1| {
            let k = Wavevector::new(k1, (k1 as f64).sqrt().round() as i64, 1);
            m_norm(k, &p) / k.norm()
        })
        .fold(0.0, f64::max);
    assert!(along >= c / 2.0, "curve attains {along}, bound {c}");
    for k in 1..=64 {
        let w = Wavevector::new(k, k, k);
        assert!(m_norm(w, &p) <= c * w.norm() * (1.0 + 1e-12));
    }
}

#[test]
fn apply_multiplier_single_pair_and_nonfinite() {
    let mut f = SpectralField::zeros(3, 3);
    f.set_hermitian(&[1, 1, 1], Complex64::new(0.3, -0.4)).unwrap();
    let u = velocity(&f, &unit()).unwrap();
    let m = m_symbol(Wavevector::new(1, 1, 1), &unit());
    for j in 0..3 {
        assert!((u[j].get(&[1, 1, 1]) - f.get(&[1, 1, 1]) * m[j]).norm() < 1e-16);
        assert!((u[j].get(&[-1, -1, -1]) - f.get(&[-1, -1, -1]) * m[j]).norm() < 1e-16);
        let support = u[j].coeffs().iter().filter(|c| c.norm() > 0.0).count();
        assert_eq!(support, 2);
        assert_eq!(u[j].vertical_mean_max(), 0.0);
    }
    let err = apply_multiplier(&f, |_| Complex64::new(f64::NAN, 0.0)).unwrap_err();
    assert!(matches!(err, mg_core::MgError::NonFiniteSymbol { .. }));
}

#[test]
fn real_buoyancy_gives_real_velocity() {
    let n = 6;
    let theta = SpectralField::from_fn(3, n, |k| {
        if k[2] == 0 || (k[0], k[1], k[2]) < (0, 0, 0) {
            return Complex64::new(0.0, 0.0);
        }
        let s = (k[0] * 7 + k[1] * 3 + k[2] * 11) as f64;
        Complex64::new(s.sin(), s.cos()) / (1.0 + (k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64)
    });
    let mut real = theta.zeros_like();
    for i in 0..theta.coeffs().len() {
        let k = theta.index_to_k(i);
        let c = theta.coeffs()[i];
        if c.norm() > 0.0 {
            real.set_hermitian(&k, c).unwrap();
        }
    }
    let u = velocity(&real, &unit()).unwrap();
    let grid = 2 * n + 2;
    let tr = Transform3::new(grid);
    for comp in &u {
        let mut data = vec![Complex64::new(0.0, 0.0); grid * grid * grid];
        for (i, c) in comp.coeffs().iter().enumerate() {
            let k = comp.index_to_k(i);
            data[tr.slot(k)] = *c;
        }
        tr.to_grid(&mut data);
        let re = data.iter().map(|v| v.re.abs()).fold(0.0, f64::max);
        let im = data.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
        assert!(im <= 1e-13 * re, "imaginary part {im} vs {re}");
    }
}

fn params() -> impl Strategy<Value = PhysicalParams> {
    (0.1f64..10.0, 0.1f64..10.0, 0.1f64..10.0).prop_map(|(om, eta, beta)| PhysicalParams::new(om, eta, beta, 0.0).unwrap())
}

fn wavevector() -> impl Strategy<Value = Wavevector> {
    (-200i64..=200, -200i64..=200, -200i64..=200)
        .prop_filter("k3 != 0", |k| k.2 != 0)
        .prop_map(|(a, b, c)| Wavevector::new(a, b, c))
}

proptest! {
    #[test]
    fn divergence_free(k in wavevector(), p in params()) {
        let scale = m_norm(k, &p) * k.norm();
        prop_assert!(divergence_residual(k, &p).abs() <= 1e-13 * scale.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn t_identities(k in wavevector(), p in params()) {
        let m = m_symbol(k, &p);
        let scale = m_norm(k, &p) * k.norm();
        prop_assert!(t_contraction_residual(k, &p).norm() <= 1e-13 * scale.max(f64::MIN_POSITIVE));
        let rec = t_reconstruction(k, &p);
        for j in 0..3 {
            prop_assert!((rec[j] - m[j]).norm() <= 1e-14 * m_norm(k, &p).max(f64::MIN_POSITIVE));
        }
    }

    #[test]
    fn symbol_is_even(k in wavevector(), p in params()) {
        let neg = Wavevector::new(-k.k1, -k.k2, -k.k3);
        prop_assert_eq!(m_symbol(k, &p), m_symbol(neg, &p));
    }

    #[test]
    fn exact_mode_agrees_with_floats(k in wavevector(), om in 1i64..5, mu in 1i64..5) {
        let p = PhysicalParams::from_mu(om as f64, mu as f64, 0.0).unwrap();
        let f = m_symbol(k, &p);
        let e = exact::m_symbol(k, om, mu);
        for j in 0..3 {
            let v = *e[j].numer() as f64 / *e[j].denom() as f64;
            prop_assert!((f[j] - v).abs() <= 1e-14 * m_norm(k, &p));
        }
    }
}
