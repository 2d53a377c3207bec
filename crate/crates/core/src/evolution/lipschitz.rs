//! Amplification of small eigenmode perturbations of `a sin(m x3)` on the
//! family `k2² = k1 = j`: the ratio `‖θ^ε(t)‖/ε` grows without bound in `j`,
//! so no uniform Lipschitz constant exists.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::spectrum::{solve_growth_rate, ModeParams};
use crate::symbols::PhysicalParams;

use super::full_slice::{evolve_full_slice, full_slice_step_limit, sine_steady_state, FullSliceState};
use super::nonlinear::{eigenmode_field, steady_state_field, NonlinearConfig, NonlinearSolver};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LipschitzConfig {
    pub j_list: Vec<i64>,
    pub eps: f64,
    /// Probe time; defaults to `2/σ*(max j)`.
    #[serde(default)]
    pub t_probe: Option<f64>,
    #[serde(default)]
    pub phys: PhysicalParams,
    pub a: f64,
    pub m: i64,
    /// Truncation radius of the nonlinear runs.
    pub n: usize,
    pub dt: f64,
    /// Estimate constant used for the analytic-window check.
    pub c_r: f64,
    #[serde(default = "default_r")]
    pub r: f64,
}

fn default_r() -> f64 {
    3.5
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzRow {
    pub j: i64,
    pub k1: i64,
    pub k2: i64,
    pub sigma: f64,
    pub t_probe: f64,
    /// `‖Θ(t) − Θ₀‖/ε` from the nonlinear run; `None` when refused.
    pub ratio_nonlinear: Option<f64>,
    /// Same ratio from the linear full-slice evolution.
    pub ratio_linear: f64,
    /// `e^{σ* t_probe}`.
    pub ratio_exponential: f64,
    /// Analytic existence time of the initial data under the configured `C_r`.
    pub t_star: Option<f64>,
    pub refused: Option<String>,
}

fn integer_sqrt(j: i64) -> Option<i64> {
    let r = (j as f64).sqrt().round() as i64;
    (r * r == j).then_some(r)
}

/// Runs every `j` of the list (in parallel) and returns rows sorted by `j`.
pub fn lipschitz_blowup_experiment(cfg: &LipschitzConfig) -> Result<Vec<LipschitzRow>> {
    if cfg.j_list.is_empty() {
        return Err(MgError::InvalidArgument("empty j list".into()));
    }
    if !(cfg.eps > 0.0 && cfg.dt > 0.0) {
        return Err(MgError::InvalidArgument("eps and dt must be positive".into()));
    }
    let mut modes = Vec::new();
    for &j in &cfg.j_list {
        let k2 = integer_sqrt(j)
            .ok_or_else(|| MgError::InvalidArgument(format!("j = {j} is not a perfect square")))?;
        if j < cfg.m {
            return Err(MgError::InvalidArgument(format!("j = {j} must be at least m = {}", cfg.m)));
        }
        if j as usize > cfg.n {
            return Err(MgError::InvalidArgument(format!("k1 = {j} exceeds the truncation N = {}", cfg.n)));
        }
        let mp = ModeParams::new(cfg.a, cfg.m, j, k2, cfg.phys)?;
        modes.push((j, solve_growth_rate(&mp)?));
    }
    let sigma_top = modes
        .iter()
        .max_by_key(|(j, _)| *j)
        .map(|(_, m)| m.sigma)
        .unwrap();
    let t_probe = cfg.t_probe.unwrap_or(2.0 / sigma_top);
    if !(t_probe > 0.0) {
        return Err(MgError::InvalidArgument("t_probe must be positive".into()));
    }
    let mut rows: Vec<LipschitzRow> = modes
        .par_iter()
        .map(|(j, mode)| -> Result<LipschitzRow> {
            let mp = mode.params;
            let phys = mp.phys.with_kappa(0.0)?;
            let theta0 = steady_state_field(cfg.a, cfg.m, cfg.n)?;
            let psi = eigenmode_field(mode, cfg.n)?;
            let mut init = theta0.clone();
            init.axpy(cfg.eps, &psi);
            let steps = (t_probe / cfg.dt).ceil().max(1.0);
            let mut ncfg = NonlinearConfig::new(phys, t_probe / steps, t_probe);
            ncfg.c_r = cfg.c_r;
            ncfg.r = cfg.r;
            ncfg.estimate_radius = false;

            let (ratio_nonlinear, t_star, refused, cutoff) = match NonlinearSolver::new(&init, &init.zeros_like(), &ncfg) {
                Ok(mut solver) => {
                    let cutoff = solver.cutoff();
                    for _ in 0..steps as usize {
                        solver.step()?;
                    }
                    let ratio = solver.state().sub(&theta0).l2_norm() / cfg.eps;
                    (Some(ratio), solver.analytic_window().map(|w| w.t_star), None, cutoff)
                }
                Err(e @ MgError::AnalyticWindow { limit, .. }) => {
                    log::warn!("j = {j}: {e}");
                    (None, Some(limit), Some(e.to_string()), ((2 * cfg.n + 1) / 3) as i64)
                }
                Err(e) => return Err(e),
            };

            // Linear surrogate on the same vertical band.
            let mut slice = FullSliceState::zeros(mp.k1, mp.k2, phys, 0.0, cutoff)?;
            for (i, c) in mode.unit_coefficients().iter().enumerate() {
                let k3 = mp.m * (i as i64 + 1);
                if k3 > cutoff {
                    break;
                }
                slice.set(k3, Complex64::new(0.0, -c / 2.0));
                slice.set(-k3, Complex64::new(0.0, c / 2.0));
            }
            let steady = sine_steady_state(cfg.a, cfg.m);
            let lin_steps = (t_probe / cfg.dt.min(full_slice_step_limit(&slice, &steady))).ceil();
            let traj = evolve_full_slice(&slice, &steady, t_probe / lin_steps, t_probe)?;
            let ratio_linear = traj.norm.last().unwrap() / traj.norm[0];

            Ok(LipschitzRow {
                j: *j,
                k1: mp.k1,
                k2: mp.k2,
                sigma: mode.sigma,
                t_probe,
                ratio_nonlinear,
                ratio_linear,
                ratio_exponential: (mode.sigma * t_probe).exp(),
                t_star,
                refused,
            })
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.j);
    Ok(rows)
}
