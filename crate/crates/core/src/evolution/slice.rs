//! Restricted slice system: real coefficients `c_p` of `sin(m p x3)`.

use serde::Serialize;

use crate::error::{MgError, Result};
use crate::spectrum::ModeParams;

use super::rk4_step;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceState {
    pub mp: ModeParams,
    pub kappa: f64,
    /// `c_p`, `p = 1..=P` (index 0 is `c_1`).
    pub c: Vec<f64>,
    pub t: f64,
}

impl SliceState {
    pub fn new(mp: ModeParams, kappa: f64, c: Vec<f64>) -> Result<Self> {
        if c.len() < 8 {
            return Err(MgError::InvalidArgument(format!("P = {} must be at least 8", c.len())));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(MgError::InvalidArgument(format!("kappa = {kappa} must be non-negative")));
        }
        Ok(Self { mp, kappa, c, t: 0.0 })
    }

    pub fn norm(&self) -> f64 {
        self.c.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// `dc_p/dt = −c_{p+1}/α_{p+1} − c_{p−1}/α_{p−1} − κ(k1²+k2²+m²p²)c_p`, with
/// no `p − 1` term in row 1 and no `p + 1` term in row `P`.
pub fn slice_rhs(state: &SliceState) -> Vec<f64> {
    let mut out = vec![0.0; state.c.len()];
    let inv_alpha: Vec<f64> = (1..=state.c.len()).map(|p| 1.0 / state.mp.alpha(p)).collect();
    apply(&state.mp, state.kappa, &inv_alpha, &state.c, &mut out);
    out
}

fn apply(mp: &ModeParams, kappa: f64, inv_alpha: &[f64], c: &[f64], out: &mut [f64]) {
    let n = c.len();
    for i in 0..n {
        let mut v = -mp.damping(i + 1, kappa) * c[i];
        if i + 1 < n {
            v -= c[i + 1] * inv_alpha[i + 1];
        }
        if i > 0 {
            v -= c[i - 1] * inv_alpha[i - 1];
        }
        out[i] = v;
    }
}

/// `max_p Σ_q |A_pq|` of the truncated generator.
pub fn max_generator_row_sum(mp: &ModeParams, kappa: f64, p_max: usize) -> f64 {
    (1..=p_max)
        .map(|p| {
            let mut s = mp.damping(p, kappa);
            if p > 1 {
                s += 1.0 / mp.alpha(p - 1);
            }
            if p < p_max {
                s += 1.0 / mp.alpha(p + 1);
            }
            s
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceTrajectory {
    pub t: Vec<f64>,
    pub norm: Vec<f64>,
    /// `(t, c)` every `stride` steps, including the initial state.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub final_state: SliceState,
}

/// RK4 integration of the slice system on `[t, t + t_end]`.
///
/// Requires `dt ≤ 0.1 / max_p Σ_q |A_pq|`.
pub fn evolve_slice(state: &SliceState, dt: f64, t_end: f64, stride: usize) -> Result<SliceTrajectory> {
    let p_max = state.c.len();
    if p_max < 8 {
        return Err(MgError::InvalidArgument(format!("P = {p_max} must be at least 8")));
    }
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(MgError::InvalidArgument("dt and T must be positive".into()));
    }
    let limit = 0.1 / max_generator_row_sum(&state.mp, state.kappa, p_max);
    if dt > limit {
        return Err(MgError::InvalidArgument(format!(
            "dt = {dt} exceeds the stability margin {limit:e}"
        )));
    }
    let steps = (t_end / dt).round().max(1.0) as usize;
    let stride = stride.max(1);
    let inv_alpha: Vec<f64> = (1..=p_max).map(|p| 1.0 / state.mp.alpha(p)).collect();
    let mut cur = state.clone();
    let mut traj = SliceTrajectory {
        t: vec![cur.t],
        norm: vec![cur.norm()],
        snapshots: vec![(cur.t, cur.c.clone())],
        final_state: state.clone(),
    };
    let t0 = cur.t;
    for step in 1..=steps {
        rk4_step(&mut cur.c, dt, |y, out| {
            apply(&cur.mp, cur.kappa, &inv_alpha, y, out);
            Ok(())
        })?;
        cur.t = t0 + step as f64 * dt;
        let norm = cur.norm();
        if !norm.is_finite() {
            return Err(MgError::Divergence { step });
        }
        traj.t.push(cur.t);
        traj.norm.push(norm);
        if step % stride == 0 {
            traj.snapshots.push((cur.t, cur.c.clone()));
        }
    }
    traj.final_state = cur;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::solve_growth_rate;

    fn unit() -> ModeParams {
        ModeParams::unit(1.0, 1, 1, 1).unwrap()
    }

    #[test]
    fn stencil_locality() {
        let mut c = vec![0.0; 10];
        c[0] = 1.0;
        let rhs = slice_rhs(&SliceState::new(unit(), 0.0, c).unwrap());
        assert_eq!(rhs[0], 0.0);
        assert_eq!(rhs[1], -1.0 / 13.0);
        assert!(rhs[2..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn eigenvector_is_fixed_direction() {
        let mode = solve_growth_rate(&unit()).unwrap();
        let state = SliceState::new(unit(), 0.0, mode.c_tilde.clone()).unwrap();
        let rhs = slice_rhs(&state);
        for p in 0..20 {
            let rel = (rhs[p] - mode.sigma * mode.c_tilde[p]).abs() / (mode.sigma * mode.c_tilde[p].abs());
            assert!(rel <= 1e-10, "p = {}: {rel:e}", p + 1);
        }
    }

    #[test]
    fn rejects_large_step_and_short_state() {
        assert!(SliceState::new(unit(), 0.0, vec![1.0; 4]).is_err());
        let s = SliceState::new(unit(), 0.0, vec![1.0; 16]).unwrap();
        assert!(evolve_slice(&s, 10.0, 20.0, 1).is_err());
    }
}
