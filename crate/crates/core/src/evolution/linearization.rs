//! Linearisation check for the diffusive nonlinear solver: a small
//! eigenmode perturbation of `a sin(m x3)`, held by the source
//! `S = −κΔΘ₀`, must grow at the continued-fraction rate σ*(κ), and so must
//! the induced magnetic perturbation.

use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::spectrum::{diffusive_sweep, solve_growth_rate_diffusive, ModeParams};
use crate::symbols::{magnetic_field, PhysicalParams};

use super::nonlinear::{eigenmode_field, steady_source, steady_state_field, NonlinearConfig, NonlinearSolver};
use super::{measure_growth_rate, GrowthFit};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizationConfig {
    pub a: f64,
    pub m: i64,
    pub kappa: f64,
    /// Truncation radius of the nonlinear run.
    pub n: usize,
    pub eps: f64,
    /// The run stops once `‖Θ − Θ₀‖` exceeds this.
    pub threshold: f64,
    #[serde(default)]
    pub phys: PhysicalParams,
    /// Time step; defaults to `min(0.02/σ*, 0.05)`.
    #[serde(default)]
    pub dt: Option<f64>,
    /// Hard stop on the horizon.
    pub t_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearizationResult {
    pub k1: i64,
    pub k2: i64,
    pub sigma: f64,
    pub theta_fit: GrowthFit,
    pub magnetic_fit: GrowthFit,
    pub t_end: f64,
    pub steps: usize,
    pub final_perturbation: f64,
    pub t: Vec<f64>,
    pub theta_norm: Vec<f64>,
    pub magnetic_norm: Vec<f64>,
}

/// Runs the perturbation on the fastest-growing slice resolved by the
/// dealiased band.
///
/// Any slice in the band is seeded at round-off level by the nonlinear terms,
/// so only the band's dominant mode yields a clean exponential.
pub fn linearization_experiment(cfg: &LinearizationConfig) -> Result<LinearizationResult> {
    if !(cfg.kappa > 0.0) {
        return Err(MgError::InvalidArgument("kappa must be positive".into()));
    }
    if !(cfg.eps > 0.0 && cfg.threshold > cfg.eps && cfg.t_max > 0.0) {
        return Err(MgError::InvalidArgument("need 0 < eps < threshold and t_max > 0".into()));
    }
    let phys = cfg.phys.with_kappa(cfg.kappa)?;
    let band = ((2 * cfg.n + 1) / 3) as i64;
    let best = diffusive_sweep(cfg.kappa, cfg.a, cfg.m, &phys, band, band)?
        .into_iter()
        .filter_map(|p| p.sigma.map(|s| (p.k1, p.k2, s)))
        .max_by(|x, y| x.2.total_cmp(&y.2))
        .ok_or_else(|| MgError::InsufficientData("no unstable slice inside the band".into()))?;
    let mp = ModeParams::new(cfg.a, cfg.m, best.0, best.1, phys)?;
    let mode = solve_growth_rate_diffusive(&mp, cfg.kappa)?
        .ok_or_else(|| MgError::InsufficientData("selected slice has no positive root".into()))?;

    let theta0 = steady_state_field(cfg.a, cfg.m, cfg.n)?;
    let source = steady_source(&theta0, cfg.kappa);
    let mut init = theta0.clone();
    init.axpy(cfg.eps, &eigenmode_field(&mode, cfg.n)?);
    let dt = cfg.dt.unwrap_or((0.02 / mode.sigma).min(0.05));
    let mut ncfg = NonlinearConfig::new(phys, dt, cfg.t_max);
    ncfg.estimate_radius = false;
    let mut solver = NonlinearSolver::new(&init, &source, &ncfg)?;

    let (mut t, mut th, mut bn) = (Vec::new(), Vec::new(), Vec::new());
    let last = loop {
        let pert = solver.state().sub(&theta0);
        let norm = pert.l2_norm();
        if norm > cfg.threshold || solver.time() > cfg.t_max {
            break norm;
        }
        let b = magnetic_field(&pert, &phys)?;
        t.push(solver.time());
        th.push(norm);
        bn.push(b.iter().map(|f| f.l2_norm().powi(2)).sum::<f64>().sqrt());
        solver.step()?;
    };
    let t_end = *t.last().unwrap_or(&0.0);
    let theta_fit = measure_growth_rate(&t, &th, (0.0, t_end))?;
    let magnetic_fit = measure_growth_rate(&t, &bn, (0.0, t_end))?;
    Ok(LinearizationResult {
        k1: mp.k1,
        k2: mp.k2,
        sigma: mode.sigma,
        theta_fit,
        magnetic_fit,
        t_end,
        steps: solver.steps_taken(),
        final_perturbation: last,
        t,
        theta_norm: th,
        magnetic_norm: bn,
    })
}
