//! Gevrey norms, analyticity-radius estimation and radius tracking.
//!
//! Norms follow the normalisation of [`crate::field`]:
//! `‖f‖_{τ,r}² = Σ_{k≠0} |k|^{2r} e^{2τ|k|} |f̂(k)|²`.

use std::io::Write;

use serde::Serialize;

use crate::error::{MgError, Result};
use crate::field::SpectralField;

/// Relative floor below which shell maxima are treated as round-off.
pub const RADIUS_FLOOR: f64 = 1e-14;
/// Minimum number of shells used by [`radius_estimate`].
pub const MIN_SHELLS: usize = 6;

/// `(Σ_{k≠0} |k|^{2r} e^{2τ|k|} |f̂(k)|²)^{1/2}`, accumulated in scaled form
/// so only a genuinely unrepresentable result reports overflow.
pub fn gevrey_norm(f: &SpectralField, tau: f64, r: f64) -> Result<f64> {
    if !(tau.is_finite() && tau >= 0.0) {
        return Err(MgError::InvalidArgument(format!("tau = {tau} must be non-negative")));
    }
    let mut terms = Vec::new();
    let mut top = f64::NEG_INFINITY;
    let mut top_shell = 0.0;
    for (i, c) in f.coeffs().iter().enumerate() {
        let mag = c.norm();
        if mag == 0.0 {
            continue;
        }
        let kn = f.k_norm_at(i);
        if kn == 0.0 {
            continue;
        }
        let ln = 2.0 * (r * kn.ln() + tau * kn + mag.ln());
        if ln > top {
            top = ln;
            top_shell = kn;
        }
        terms.push(ln);
    }
    if terms.is_empty() {
        return Ok(0.0);
    }
    let scaled: f64 = terms.iter().map(|l| (l - top).exp()).sum();
    let ln_norm = 0.5 * (top + scaled.ln());
    if ln_norm >= f64::MAX.ln() {
        return Err(MgError::Overflow { shell: top_shell });
    }
    Ok(ln_norm.exp())
}

/// `a = Σ_{k≠0} |k|^{3/2} |f̂(k)|`.
pub fn sobolev_a(f: &SpectralField) -> f64 {
    f.coeffs()
        .iter()
        .enumerate()
        .map(|(i, c)| f.k_norm_at(i).powf(1.5) * c.norm())
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RadiusEstimate {
    /// Decay rate of the shell maxima; `+∞` for finite support.
    pub tau: f64,
    /// The field is a trigonometric polynomial well inside the truncation.
    pub entire: bool,
    pub shells_used: usize,
    /// RMS residual of the log-linear fit.
    pub fit_residual: f64,
}

/// Exponential decay rate of the spectrum.
///
/// Shells are unit-width bins of `|k|`; each contributes its largest
/// coefficient at the `|k|` where that maximum occurs. Shells below
/// `RADIUS_FLOOR` times the field maximum are discarded. The fit regresses
/// `ln max|f̂|` on `(1, |k|, ln |k|)` so an algebraic prefactor does not bias
/// the exponential rate. A field whose nonzero shells stop at least one
/// complete shell before the truncation edge is reported as entire.
pub fn radius_estimate(f: &SpectralField) -> Result<RadiusEstimate> {
    let n = f.radius();
    let n_bins = ((f.dim() as f64).sqrt() * n as f64).floor() as usize + 1;
    let mut best = vec![(0.0f64, 0.0f64); n_bins];
    for (i, c) in f.coeffs().iter().enumerate() {
        let kn = f.k_norm_at(i);
        if kn == 0.0 {
            continue;
        }
        let bin = kn.floor() as usize;
        let mag = c.norm();
        if mag > best[bin].0 {
            best[bin] = (mag, kn);
        }
    }
    let global = best.iter().map(|b| b.0).fold(0.0, f64::max);
    if global == 0.0 {
        return Err(MgError::InsufficientData("zero field".into()));
    }
    let last_nonzero = best.iter().rposition(|b| b.0 > 0.0).unwrap_or(0);
    if n >= 2 && last_nonzero + 1 < n {
        return Ok(RadiusEstimate {
            tau: f64::INFINITY,
            entire: true,
            shells_used: 0,
            fit_residual: 0.0,
        });
    }
    let pts: Vec<(f64, f64)> = best
        .iter()
        .filter(|b| b.0 > RADIUS_FLOOR * global)
        .map(|b| (b.1, b.0.ln()))
        .collect();
    if pts.len() < MIN_SHELLS {
        return Err(MgError::InsufficientData(format!(
            "{} usable shells, need {MIN_SHELLS}",
            pts.len()
        )));
    }
    let (coef, resid) = least_squares(&pts, |x| [1.0, x, x.ln()]);
    Ok(RadiusEstimate {
        tau: (-coef[1]).max(0.0),
        entire: false,
        shells_used: pts.len(),
        fit_residual: resid,
    })
}

/// Ordinary least squares with three regressors via the normal equations,
/// centred for conditioning. Returns coefficients and RMS residual.
fn least_squares<F: Fn(f64) -> [f64; 3]>(pts: &[(f64, f64)], basis: F) -> ([f64; 3], f64) {
    let rows: Vec<[f64; 3]> = pts.iter().map(|p| basis(p.0)).collect();
    let mut g = [[0.0; 3]; 3];
    let mut rhs = [0.0; 3];
    for (row, p) in rows.iter().zip(pts) {
        for i in 0..3 {
            rhs[i] += row[i] * p.1;
            for j in 0..3 {
                g[i][j] += row[i] * row[j];
            }
        }
    }
    let coef = solve3(g, rhs);
    let ss: f64 = rows
        .iter()
        .zip(pts)
        .map(|(row, p)| (p.1 - (0..3).map(|i| row[i] * coef[i]).sum::<f64>()).powi(2))
        .sum();
    (coef, (ss / pts.len() as f64).sqrt())
}

/// Gaussian elimination with partial pivoting on a 3×3 system.
fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for i in (0..3).rev() {
        let s: f64 = (i + 1..3).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Linear radius law `τ(t) = τ₀ − 2C_rK₀t` and the breakdown time
/// `T* = τ₀/(2C_rK₀)`.
pub fn radius_ode_linear(tau0: f64, k0: f64, c_r: f64, t: f64) -> (f64, f64) {
    let rate = 2.0 * c_r * k0;
    (tau0 - rate * t, tau0 / rate)
}

/// Time series of `a(t)` with running `A(t)` and the tracked radius.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GevreyTracker {
    pub tau0: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    pub r: f64,
    pub c_r: f64,
    /// Largest sample spacing accepted by the quadratures.
    pub max_gap: f64,
    t: Vec<f64>,
    a: Vec<f64>,
    big_a: Vec<f64>,
    tau: Vec<f64>,
    // Incremental state of the refined radius: B(t) and
    // J(t) = ∫₀ᵗ a(s) e^{B(s) − B(t)} ds.
    b: f64,
    j: f64,
}

impl GevreyTracker {
    pub fn new(tau0: f64, k0: f64, r: f64, c_r: f64, max_gap: f64) -> Result<Self> {
        for (name, v) in [("tau0", tau0), ("K0", k0), ("C_r", c_r), ("max_gap", max_gap)] {
            if !(v > 0.0) {
                return Err(MgError::InvalidArgument(format!("{name} = {v} must be positive")));
            }
        }
        if !r.is_finite() {
            return Err(MgError::InvalidArgument("r must be finite".into()));
        }
        Ok(Self {
            tau0,
            k0,
            r,
            c_r,
            max_gap,
            t: Vec::new(),
            a: Vec::new(),
            big_a: Vec::new(),
            tau: Vec::new(),
            b: 0.0,
            j: 0.0,
        })
    }

    /// Tracker seeded from initial data: `K₀ = ‖Θ₀‖_{τ₀}` and `a(0)`.
    /// Requires `r > d/2 + 3/2`.
    pub fn from_field(theta0: &SpectralField, tau0: f64, r: f64, c_r: f64, max_gap: f64) -> Result<Self> {
        let d = theta0.dim() as f64;
        if r <= d / 2.0 + 1.5 {
            return Err(MgError::InvalidArgument(format!(
                "Sobolev exponent r = {r} must exceed d/2 + 3/2 = {}",
                d / 2.0 + 1.5
            )));
        }
        let k0 = gevrey_norm(theta0, tau0, r)?;
        let mut tracker = Self::new(tau0, k0, r, c_r, max_gap)?;
        tracker.push(0.0, sobolev_a(theta0))?;
        Ok(tracker)
    }

    /// Appends `a(t)`; the first sample must be at `t = 0` and times must
    /// increase strictly.
    pub fn push(&mut self, t: f64, a: f64) -> Result<()> {
        if !(a.is_finite() && a >= 0.0) {
            return Err(MgError::InvalidArgument(format!("a = {a} must be non-negative")));
        }
        match self.t.last() {
            None => {
                if t != 0.0 {
                    return Err(MgError::Sampling("first sample must be at t = 0".into()));
                }
                self.t.push(0.0);
                self.a.push(a);
                self.big_a.push(0.0);
                self.tau.push(self.tau0);
            }
            Some(&t_prev) => {
                if !(t > t_prev) {
                    return Err(MgError::Sampling(format!("time {t} does not follow {t_prev}")));
                }
                let h = t - t_prev;
                let a_prev = *self.a.last().unwrap();
                let big_a_prev = *self.big_a.last().unwrap();
                let big_a = big_a_prev + 0.5 * h * (a_prev + a);
                let db = self.c_r * self.k0 * h
                    * ((-self.c_r * big_a_prev).exp() + (-self.c_r * big_a).exp());
                let decay = (-db).exp();
                self.j = decay * self.j + 0.5 * h * (a_prev * decay + a);
                self.b += db;
                let refined = self.tau0 * (-self.b).exp() - 3.0 * self.c_r * self.j;
                let prev_tau = *self.tau.last().unwrap();
                self.t.push(t);
                self.a.push(a);
                self.big_a.push(big_a);
                self.tau.push(refined.min(prev_tau).max(0.0));
            }
        }
        Ok(())
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn a_samples(&self) -> &[f64] {
        &self.a
    }

    /// Running `A(t_i)`.
    pub fn big_a(&self) -> &[f64] {
        &self.big_a
    }

    /// Tracked radius, clamped non-increasing and at zero.
    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    /// Largest spacing of the stored grid.
    pub fn step(&self) -> f64 {
        self.t.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max)
    }

    /// Samples covering `[0, t]`, with the last interval cut at `t` and `a`
    /// linearly interpolated there.
    fn samples_to(&self, t: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if !(t >= 0.0) {
            return Err(MgError::InvalidArgument(format!("t = {t} must be non-negative")));
        }
        let last = *self
            .t
            .last()
            .ok_or_else(|| MgError::Sampling("tracker has no samples".into()))?;
        if t > last * (1.0 + 1e-12) {
            return Err(MgError::Sampling(format!("t = {t} beyond the last sample {last}")));
        }
        let mut ts = Vec::new();
        let mut avals = Vec::new();
        for (i, &ti) in self.t.iter().enumerate() {
            if ti <= t {
                if i > 0 && ti - self.t[i - 1] > self.max_gap {
                    return Err(MgError::Sampling(format!(
                        "gap {} at t = {ti} exceeds {}",
                        ti - self.t[i - 1],
                        self.max_gap
                    )));
                }
                ts.push(ti);
                avals.push(self.a[i]);
            } else {
                let (t0, a0) = (self.t[i - 1], self.a[i - 1]);
                if ti - t0 > self.max_gap {
                    return Err(MgError::Sampling(format!("gap {} at t = {ti} exceeds {}", ti - t0, self.max_gap)));
                }
                if t > t0 {
                    ts.push(t);
                    avals.push(a0 + (self.a[i] - a0) * (t - t0) / (ti - t0));
                }
                break;
            }
        }
        Ok((ts, avals))
    }

    /// `A`, `B = 2C_rK₀∫exp(−C_rA)`, `J = ∫a e^{B(s)−B(t)}` and
    /// `E = ∫exp(−A)` at `t` by composite trapezoid on the sample grid.
    fn quadratures(&self, t: f64) -> Result<Quadratures> {
        let (ts, avals) = self.samples_to(t)?;
        let mut q = Quadratures::default();
        for i in 1..ts.len() {
            let h = ts[i] - ts[i - 1];
            let a_prev = q.big_a;
            q.big_a += 0.5 * h * (avals[i - 1] + avals[i]);
            let db = self.c_r * self.k0 * h * ((-self.c_r * a_prev).exp() + (-self.c_r * q.big_a).exp());
            let decay = (-db).exp();
            q.j = decay * q.j + 0.5 * h * (avals[i - 1] * decay + avals[i]);
            q.b += db;
            q.e += 0.5 * h * ((-a_prev).exp() + (-q.big_a).exp());
        }
        Ok(q)
    }

    /// Writes `t,a,A,tau` rows.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,a,A,tau")?;
        for i in 0..self.t.len() {
            writeln!(w, "{:e},{:e},{:e},{:e}", self.t[i], self.a[i], self.big_a[i], self.tau[i])?;
        }
        Ok(())
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Quadratures {
    big_a: f64,
    b: f64,
    j: f64,
    e: f64,
}

/// `τ(t) = τ₀e^{−B(t)} − 3C_r∫₀ᵗ a(s) e^{−(B(t)−B(s))} ds` with
/// `B(t) = 2C_rK₀∫₀ᵗ e^{−C_rA}`, the explicit solution of
/// `τ̇ + 3C_r a + 2C_rK₀ τ e^{−C_rA} = 0`. May be negative.
pub fn radius_ode_refined(tracker: &GevreyTracker, t: f64) -> Result<f64> {
    let q = tracker.quadratures(t)?;
    Ok(tracker.tau0 * (-q.b).exp() - 3.0 * tracker.c_r * q.j)
}

/// Continuation criterion `τ₀/C_r > A(T)·exp(C_rK₀∫₀ᵀ exp(−A(t)) dt)`,
/// evaluated literally.
pub fn breakdown_criterion(tracker: &GevreyTracker, t: f64) -> Result<bool> {
    let q = tracker.quadratures(t)?;
    let (c, k0) = (tracker.c_r, tracker.k0);
    Ok(tracker.tau0 / c > q.big_a * (c * k0 * q.e).exp())
}

/// `τ₀/(3C_r) > A(t)·exp(+B(t))`: bounding `e^{B(s)−B(t)} ≤ 1` in the
/// refined formula shows this guarantees `τ(t) > 0`.
pub fn positivity_condition(tracker: &GevreyTracker, t: f64) -> Result<bool> {
    let q = tracker.quadratures(t)?;
    Ok(tracker.tau0 / (3.0 * tracker.c_r) > q.big_a * q.b.exp())
}

/// The three radius diagnostics at one time, with disagreement flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CriterionReport {
    pub t: f64,
    pub refined_tau: f64,
    pub breakdown_criterion: bool,
    pub positivity_condition: bool,
    /// The literal criterion and the refined radius disagree on continuation.
    pub criterion_vs_radius_disagree: bool,
}

pub fn criterion_report(tracker: &GevreyTracker, t: f64) -> Result<CriterionReport> {
    let refined_tau = radius_ode_refined(tracker, t)?;
    let crit = breakdown_criterion(tracker, t)?;
    Ok(CriterionReport {
        t,
        refined_tau,
        breakdown_criterion: crit,
        positivity_condition: positivity_condition(tracker, t)?,
        criterion_vs_radius_disagree: crit != (refined_tau > 0.0),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    fn pair(k: [i64; 3], c: f64, n: usize) -> SpectralField {
        let mut f = SpectralField::zeros(3, n);
        f.set_hermitian(&k, Complex64::new(0.0, c)).unwrap();
        f
    }

    #[test]
    fn single_pair_norms() {
        let f = pair([1, 2, 2], 0.3, 4);
        let g = gevrey_norm(&f, 0.7, 2.5).unwrap();
        assert_relative_eq!(g, 2f64.sqrt() * 3f64.powf(2.5) * (0.7 * 3.0f64).exp() * 0.3, max_relative = 1e-14);
        assert_relative_eq!(gevrey_norm(&f, 0.0, 0.0).unwrap(), f.l2_norm(), max_relative = 1e-15);
        let h = pair([1, 1, 1], 0.25, 3);
        assert_relative_eq!(sobolev_a(&h), 2.0 * 3f64.powf(0.75) * 0.25, max_relative = 1e-14);
        assert_eq!(sobolev_a(&SpectralField::zeros(3, 3)), 0.0);
    }

    #[test]
    fn overflow_names_shell() {
        let f = pair([0, 0, 8], 1.0, 8);
        match gevrey_norm(&f, 200.0, 0.0) {
            Err(MgError::Overflow { shell }) => assert_eq!(shell, 8.0),
            other => panic!("expected overflow, got {other:?}"),
        }
    }

    #[test]
    fn radius_of_trigonometric_polynomial() {
        let est = radius_estimate(&pair([1, 0, 1], 1.0, 16)).unwrap();
        assert!(est.entire && est.tau.is_infinite());
    }

    #[test]
    fn too_few_shells() {
        let f = SpectralField::from_fn(3, 3, |k| {
            let n = k.iter().map(|v| (v * v) as f64).sum::<f64>().sqrt();
            if n == 0.0 { Complex64::new(0.0, 0.0) } else { Complex64::new((-n).exp(), 0.0) }
        });
        assert!(matches!(radius_estimate(&f), Err(MgError::InsufficientData(_))));
    }

    #[test]
    fn linear_radius() {
        let (tau, t_star) = radius_ode_linear(2.0, 3.0, 0.5, 0.0);
        assert_eq!(tau, 2.0);
        assert_relative_eq!(t_star, 2.0 / 3.0);
        assert_relative_eq!(radius_ode_linear(2.0, 3.0, 0.5, t_star).0, 0.0, epsilon = 1e-15);
        assert_relative_eq!(radius_ode_linear(2.0, 3.0, 0.5, t_star / 2.0).0, 1.0, epsilon = 1e-15);
    }

    fn tracker_with(a: impl Fn(f64) -> f64, t_end: f64, n: usize, tau0: f64, k0: f64, c_r: f64) -> GevreyTracker {
        let h = t_end / n as f64;
        let mut tr = GevreyTracker::new(tau0, k0, 4.5, c_r, 2.0 * h).unwrap();
        for i in 0..=n {
            let t = i as f64 * h;
            tr.push(t, a(t)).unwrap();
        }
        tr
    }

    #[test]
    fn refined_radius_without_forcing() {
        let tr = tracker_with(|_| 0.0, 2.0, 200, 1.5, 0.8, 1.3);
        for &t in &[0.0, 0.37, 1.0, 2.0] {
            let v = radius_ode_refined(&tr, t).unwrap();
            assert_relative_eq!(v, 1.5 * (-2.0 * 1.3 * 0.8 * t).exp(), max_relative = 1e-12);
        }
        assert!(breakdown_criterion(&tr, 2.0).unwrap());
    }

    #[test]
    fn refined_radius_satisfies_its_ode() {
        let a = |t: f64| 0.2 + 0.1 * (3.0 * t).sin();
        let (c, k0) = (0.7, 0.4);
        let tr = tracker_with(a, 1.0, 20_000, 3.0, k0, c);
        let h = 1e-3;
        for &t in &[0.2, 0.5, 0.8] {
            let d = (radius_ode_refined(&tr, t + h).unwrap() - radius_ode_refined(&tr, t - h).unwrap()) / (2.0 * h);
            let tau = radius_ode_refined(&tr, t).unwrap();
            let big_a = tr.quadratures(t).unwrap().big_a;
            let resid = d + 3.0 * c * a(t) + 2.0 * c * k0 * tau * (-c * big_a).exp();
            assert!(resid.abs() < 1e-6, "residual {resid} at t = {t}");
        }
    }

    #[test]
    fn spiking_a_breaks_criterion() {
        let tr = tracker_with(|t| if t > 0.5 { 50.0 } else { 0.01 }, 1.0, 1000, 1.0, 1.0, 1.0);
        assert!(breakdown_criterion(&tr, 0.4).unwrap());
        assert!(!breakdown_criterion(&tr, 1.0).unwrap());
        let rep = criterion_report(&tr, 1.0).unwrap();
        assert!(!rep.positivity_condition);
        assert!(rep.refined_tau < 0.0);
    }

    #[test]
    fn tracker_series_monotone_and_sampling_errors() {
        let tr = tracker_with(|t| 1.0 + t, 1.0, 100, 2.0, 1.0, 0.5);
        assert!(tr.tau().windows(2).all(|w| w[1] <= w[0]));
        assert!(tr.big_a().windows(2).all(|w| w[1] >= w[0]));
        assert_eq!(tr.big_a()[0], 0.0);
        assert!(matches!(radius_ode_refined(&tr, 1.5), Err(MgError::Sampling(_))));
        let mut sparse = GevreyTracker::new(1.0, 1.0, 4.5, 1.0, 0.01).unwrap();
        sparse.push(0.0, 1.0).unwrap();
        sparse.push(0.5, 1.0).unwrap();
        assert!(matches!(breakdown_criterion(&sparse, 0.5), Err(MgError::Sampling(_))));
        assert!(sparse.push(0.4, 1.0).is_err());
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,a,A,tau\n"));
        assert_eq!(text.lines().count(), 102);
    }

    #[test]
    fn tracker_series_matches_quadrature() {
        let tr = tracker_with(|t| (2.0 * t).cos().abs(), 1.0, 400, 5.0, 0.3, 1.0);
        let last = *tr.times().last().unwrap();
        let direct = radius_ode_refined(&tr, last).unwrap();
        assert_relative_eq!(*tr.tau().last().unwrap(), direct.max(0.0), max_relative = 1e-12);
    }
}
