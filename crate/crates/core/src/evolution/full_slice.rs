//! General linearised operator on one horizontal Fourier slice `(k1, k2)`:
//!
//! ```text
//! ∂_t θ̂(k3) = −Σ_n M̂₃(k1, k2, n) θ̂(n) · i(k3 − n) Θ̂₀(k3 − n) − κ|k|² θ̂(k3)
//! ```
//!
//! about a steady state `Θ₀(x3)` with finitely many Fourier coefficients.
//! Rows `k3 = 0` are excluded (zero vertical mean).

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{MgError, Result};
use crate::symbols::{b_symbol, m3_symbol, PhysicalParams, Wavevector};

use super::rk4_step;
use super::slice::SliceState;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullSliceState {
    pub k1: i64,
    pub k2: i64,
    pub phys: PhysicalParams,
    pub kappa: f64,
    /// Vertical truncation: `k3 ∈ [−n_max, n_max] \ {0}`.
    pub n_max: i64,
    /// `θ̂(k3)` at index `k3 + n_max`; the `k3 = 0` entry stays zero.
    pub theta: Vec<Complex64>,
    pub t: f64,
}

impl FullSliceState {
    pub fn zeros(k1: i64, k2: i64, phys: PhysicalParams, kappa: f64, n_max: i64) -> Result<Self> {
        if n_max < 1 {
            return Err(MgError::InvalidArgument("vertical truncation must be at least 1".into()));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(MgError::InvalidArgument(format!("kappa = {kappa} must be non-negative")));
        }
        Ok(Self {
            k1,
            k2,
            phys,
            kappa,
            n_max,
            theta: vec![Complex64::new(0.0, 0.0); (2 * n_max + 1) as usize],
            t: 0.0,
        })
    }

    pub fn get(&self, k3: i64) -> Complex64 {
        if k3.abs() > self.n_max {
            return Complex64::new(0.0, 0.0);
        }
        self.theta[(k3 + self.n_max) as usize]
    }

    pub fn set(&mut self, k3: i64, v: Complex64) {
        assert!(k3 != 0 && k3.abs() <= self.n_max, "k3 = {k3} outside the slice rows");
        self.theta[(k3 + self.n_max) as usize] = v;
    }

    /// `(Σ_{k3} |θ̂|²)^{1/2}`.
    pub fn norm(&self) -> f64 {
        self.theta.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `(Σ_{k3} |b̂(k1, k2, k3)|²)^{1/2}` for the induced magnetic perturbation.
    pub fn magnetic_norm(&self) -> f64 {
        (-self.n_max..=self.n_max)
            .filter(|k3| *k3 != 0)
            .map(|k3| {
                let b = b_symbol(Wavevector::new(self.k1, self.k2, k3), &self.phys);
                let th = self.get(k3);
                b.iter().map(|c| (c * th).norm_sqr()).sum::<f64>()
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `max_{k3} |θ̂(−k3) − conj θ̂(k3)|`.
    pub fn hermitian_defect(&self) -> f64 {
        (1..=self.n_max)
            .map(|n| (self.get(-n) - self.get(n).conj()).norm())
            .fold(0.0, f64::max)
    }
}

/// `Θ̂₀` for `Θ₀ = a sin(m x3)`: `Θ̂₀(±m) = ∓ia/2`.
pub fn sine_steady_state(a: f64, m: i64) -> Vec<(i64, Complex64)> {
    vec![(m, Complex64::new(0.0, -a / 2.0)), (-m, Complex64::new(0.0, a / 2.0))]
}

/// Embeds `Σ c_p sin(m p x3)` as `θ̂(±mp) = ∓i c_p/2` with `n_max = mP`.
pub fn embed_restricted(slice: &SliceState) -> FullSliceState {
    let m = slice.mp.m;
    let p_max = slice.c.len() as i64;
    let mut out = FullSliceState::zeros(slice.mp.k1, slice.mp.k2, slice.mp.phys, slice.kappa, m * p_max)
        .expect("valid slice parameters");
    for (i, c) in slice.c.iter().enumerate() {
        let n = m * (i as i64 + 1);
        out.set(n, Complex64::new(0.0, -c / 2.0));
        out.set(-n, Complex64::new(0.0, c / 2.0));
    }
    out.t = slice.t;
    out
}

fn rhs_into(state: &FullSliceState, steady: &[(i64, Complex64)], theta: &[Complex64], out: &mut [Complex64]) {
    let nm = state.n_max;
    let h = (state.k1 * state.k1 + state.k2 * state.k2) as f64;
    for k3 in -nm..=nm {
        let row = (k3 + nm) as usize;
        if k3 == 0 {
            out[row] = Complex64::new(0.0, 0.0);
            continue;
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for &(j, s) in steady {
            let n = k3 - j;
            if n == 0 || n.abs() > nm {
                continue;
            }
            let m3 = m3_symbol(state.k1, state.k2, n, &state.phys);
            acc -= theta[(n + nm) as usize] * m3 * Complex64::new(0.0, j as f64) * s;
        }
        acc -= theta[row] * (state.kappa * (h + (k3 * k3) as f64));
        out[row] = acc;
    }
}

/// Time derivative of the slice under the linearisation about `steady`.
pub fn full_slice_rhs(state: &FullSliceState, steady: &[(i64, Complex64)]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); state.theta.len()];
    rhs_into(state, steady, &state.theta, &mut out);
    out
}

/// Upper bound on `d/dt ln Σ_{k3}|θ̂|²`:
/// `2·(μk2²/(4Ω²))·(π²/(3√5))·‖∂₃Θ₀‖ − 2κ(k1² + k2² + 1)`.
///
/// `‖∂₃Θ₀‖ = (Σ_j j²|Θ̂₀(j)|²)^{1/2}` in the crate's coefficient
/// normalisation; the constant `π²/(3√5) = (Σ_{n≠0} n⁻⁴)^{1/2}`.
pub fn gronwall_constant(k1: i64, k2: i64, phys: &PhysicalParams, kappa: f64, steady: &[(i64, Complex64)]) -> f64 {
    let d3 = steady
        .iter()
        .map(|(j, s)| (j * j) as f64 * s.norm_sqr())
        .sum::<f64>()
        .sqrt();
    let k2sq = (k2 * k2) as f64;
    2.0 * (phys.mu * k2sq / (4.0 * phys.omega * phys.omega)) * (PI * PI / (3.0 * 5f64.sqrt())) * d3
        - 2.0 * kappa * ((k1 * k1) as f64 + k2sq + 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullSliceTrajectory {
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
    /// Instantaneous `d/dt ln Σ|θ̂|² = 2 Re⟨θ, F(θ)⟩/Σ|θ̂|²` (0 for zero data).
    pub log_derivative: Vec<f64>,
    pub gronwall_bound: f64,
    pub final_state: FullSliceState,
}

impl FullSliceTrajectory {
    pub fn max_log_derivative(&self) -> f64 {
        self.log_derivative.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Whether the log-derivative stays below the Grönwall bound, allowing
    /// `tol` relative slack for round-off.
    pub fn within_gronwall(&self, tol: f64) -> bool {
        let scale = self.gronwall_bound.abs().max(f64::MIN_POSITIVE);
        self.log_derivative.iter().all(|d| *d <= self.gronwall_bound + tol * scale)
    }
}

fn log_derivative(theta: &[Complex64], rhs: &[Complex64]) -> f64 {
    let nsq: f64 = theta.iter().map(|c| c.norm_sqr()).sum();
    if nsq == 0.0 {
        return 0.0;
    }
    let inner: f64 = theta.iter().zip(rhs).map(|(a, b)| (a.conj() * b).re).sum();
    2.0 * inner / nsq
}

/// Largest admissible step, `0.1 / max_row Σ|A_row,col|`.
pub fn full_slice_step_limit(state: &FullSliceState, steady: &[(i64, Complex64)]) -> f64 {
    let nm = state.n_max;
    let h = (state.k1 * state.k1 + state.k2 * state.k2) as f64;
    let row_sum = (-nm..=nm)
        .filter(|k| *k != 0)
        .map(|k3| {
            steady
                .iter()
                .map(|&(j, s)| {
                    let n = k3 - j;
                    if n == 0 || n.abs() > nm {
                        0.0
                    } else {
                        m3_symbol(state.k1, state.k2, n, &state.phys) * (j as f64).abs() * s.norm()
                    }
                })
                .sum::<f64>()
                + state.kappa * (h + (k3 * k3) as f64)
        })
        .fold(0.0, f64::max);
    if row_sum > 0.0 {
        0.1 / row_sum
    } else {
        f64::INFINITY
    }
}

/// RK4 integration of the full slice with the Grönwall monitor.
pub fn evolve_full_slice(
    state: &FullSliceState,
    steady: &[(i64, Complex64)],
    dt: f64,
    t_end: f64,
) -> Result<FullSliceTrajectory> {
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(MgError::InvalidArgument("dt and T must be positive".into()));
    }
    let limit = full_slice_step_limit(state, steady);
    if dt > limit {
        return Err(MgError::InvalidArgument(format!(
            "dt = {dt} exceeds the stability margin {limit:e}"
        )));
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let mut cur = state.clone();
    let mut rhs = vec![Complex64::new(0.0, 0.0); cur.theta.len()];
    rhs_into(&cur, steady, &cur.theta, &mut rhs);
    let mut traj = FullSliceTrajectory {
        t: vec![cur.t],
        norm: vec![cur.norm()],
        log_derivative: vec![log_derivative(&cur.theta, &rhs)],
        gronwall_bound: gronwall_constant(state.k1, state.k2, &state.phys, state.kappa, steady),
        final_state: state.clone(),
    };
    let t0 = cur.t;
    let frozen = cur.clone();
    for step in 1..=steps {
        rk4_step(&mut cur.theta, dt, |y, out| {
            rhs_into(&frozen, steady, y, out);
            Ok(())
        })?;
        cur.t = t0 + step as f64 * dt;
        let norm = cur.norm();
        if !norm.is_finite() {
            return Err(MgError::Divergence { step });
        }
        rhs_into(&frozen, steady, &cur.theta, &mut rhs);
        traj.t.push(cur.t);
        traj.norm.push(norm);
        traj.log_derivative.push(log_derivative(&cur.theta, &rhs));
    }
    traj.final_state = cur;
    Ok(traj)
}
