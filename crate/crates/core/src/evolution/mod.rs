//! Time integration of the linearised slice systems and of the nonlinear
//! active scalar equation, plus growth-rate and ill-posedness measurements.

mod full_slice;
mod linearization;
mod lipschitz;
mod nonlinear;
mod slice;
mod transform;

use std::ops::{Add, Mul};

use serde::Serialize;

use crate::error::{MgError, Result};

pub use full_slice::{
    embed_restricted, evolve_full_slice, full_slice_rhs, full_slice_step_limit, gronwall_constant, sine_steady_state, FullSliceState,
    FullSliceTrajectory,
};
pub use linearization::{linearization_experiment, LinearizationConfig, LinearizationResult};
pub use lipschitz::{lipschitz_blowup_experiment, LipschitzConfig, LipschitzRow};
pub use nonlinear::{
    analytic_window, eigenmode_field, AnalyticWindow, evolve_nonlinear, steady_source, steady_state_field, NonlinearConfig,
    NonlinearRun, NonlinearSolver, TimeScheme, TrajectorySample,
};
pub use slice::{evolve_slice, max_generator_row_sum, slice_rhs, SliceState, SliceTrajectory};
pub use transform::Transform3;

/// One classical fourth-order Runge–Kutta step `y ← y + dt·Φ(y)`.
pub(crate) fn rk4_step<T, F>(y: &mut [T], dt: f64, mut f: F) -> Result<()>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
    F: FnMut(&[T], &mut [T]) -> Result<()>,
{
    let n = y.len();
    let mut k1 = vec![T::default(); n];
    let mut k2 = vec![T::default(); n];
    let mut k3 = vec![T::default(); n];
    let mut k4 = vec![T::default(); n];
    let mut tmp = vec![T::default(); n];
    f(y, &mut k1)?;
    for i in 0..n {
        tmp[i] = y[i] + k1[i] * (0.5 * dt);
    }
    f(&tmp, &mut k2)?;
    for i in 0..n {
        tmp[i] = y[i] + k2[i] * (0.5 * dt);
    }
    f(&tmp, &mut k3)?;
    for i in 0..n {
        tmp[i] = y[i] + k3[i] * dt;
    }
    f(&tmp, &mut k4)?;
    for i in 0..n {
        y[i] = y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
    }
    Ok(())
}

/// Exponential fit of a norm series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub intercept: f64,
    /// RMS residual of `ln(norm)` about the fitted line.
    pub residual: f64,
    pub samples: usize,
}

/// Least-squares slope of `ln(norm)` against `t` over `window = [t0, t1]`.
pub fn measure_growth_rate(t: &[f64], norm: &[f64], window: (f64, f64)) -> Result<GrowthFit> {
    if t.len() != norm.len() {
        return Err(MgError::InvalidArgument("time and norm series differ in length".into()));
    }
    let (lo, hi) = window;
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(norm)
        .filter(|(ti, _)| **ti >= lo && **ti <= hi)
        .map(|(ti, v)| (*ti, *v))
        .collect();
    if let Some((ti, v)) = pts.iter().find(|(_, v)| !(*v > 0.0)) {
        return Err(MgError::InvalidArgument(format!("non-positive norm {v} at t = {ti}")));
    }
    if pts.len() < 10 {
        return Err(MgError::InsufficientData(format!(
            "{} samples in [{lo}, {hi}], need 10",
            pts.len()
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - tm) * (p.1.ln() - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - tm).powi(2)).sum();
    let rate = sxy / sxx;
    let intercept = ym - rate * tm;
    let ss: f64 = pts
        .iter()
        .map(|p| (p.1.ln() - intercept - rate * p.0).powi(2))
        .sum();
    Ok(GrowthFit {
        rate,
        intercept,
        residual: (ss / n).sqrt(),
        samples: pts.len(),
    })
}
