use anyhow::{anyhow, Context, Result};
use mg_core::evolution::{
    analytic_window, evolve_slice, linearization_experiment, lipschitz_blowup_experiment, max_generator_row_sum,
    measure_growth_rate, steady_source, steady_state_field, LinearizationConfig, LipschitzConfig, NonlinearConfig,
    NonlinearSolver, SliceState, TimeScheme,
};
use mg_core::gevrey::{criterion_report, gevrey_norm, radius_estimate, radius_ode_linear, sobolev_a, GevreyTracker};
use mg_core::spectrum::{solve, ModeParams};
use mg_core::SpectralField;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Definition;
use crate::config::{positive, positive_list, require, ConfigError, PhysConfig, Tolerances};
use crate::report::{num, opt, Check, Report};

/// One Fourier coefficient of the initial data; its conjugate partner is
/// set automatically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub k: [i64; 3],
    pub re: f64,
    pub im: f64,
}

fn mode(k: [i64; 3], re: f64, im: f64) -> ModeSpec {
    ModeSpec { k, re, im }
}

fn validate_modes(modes: &[ModeSpec], n: usize, path: &str) -> Result<(), ConfigError> {
    require(!modes.is_empty(), path, "must not be empty")?;
    for (i, m) in modes.iter().enumerate() {
        let p = format!("{path}[{i}].k");
        require(m.k[2] != 0, &p, "vertical wavenumber must be non-zero")?;
        require(
            m.k.iter().all(|c| c.unsigned_abs() as usize <= n),
            &p,
            format!("outside the truncation |k|_inf <= {n}"),
        )?;
        require(m.re.is_finite() && m.im.is_finite(), &format!("{path}[{i}]"), "coefficient must be finite")?;
    }
    Ok(())
}

fn build_field(modes: &[ModeSpec], n: usize) -> Result<SpectralField> {
    let mut f = SpectralField::zeros(3, n);
    for m in modes {
        f.set_hermitian(&m.k, Complex64::new(m.re, m.im))?;
    }
    Ok(f)
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(&r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SliceGrowthParams {
    pub a: f64,
    pub m: i64,
    pub k1: i64,
    pub k2: i64,
    pub kappa: f64,
    pub phys: PhysConfig,
    /// Eigenvector run horizon in units of `1/σ*`.
    pub eigen_periods: f64,
    /// Generic run: `c_p = 1/p` for `p ≤ generic_p`; disabled when 0.
    pub generic_p: usize,
    /// Fit window of the generic run in units of `1/σ*`.
    pub generic_window: [f64; 2],
}

impl Default for SliceGrowthParams {
    fn default() -> Self {
        Self {
            a: 1.0,
            m: 1,
            k1: 1,
            k2: 1,
            kappa: 0.0,
            phys: PhysConfig::default(),
            eigen_periods: 3.0,
            generic_p: 64,
            generic_window: [10.0, 20.0],
        }
    }
}

pub struct SliceGrowth;

impl Definition for SliceGrowth {
    type Params = SliceGrowthParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[("eigen_rel", 1e-3), ("generic_rel", 1e-2)];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        positive(p.a, "params.a")?;
        for (v, path) in [(p.m, "params.m"), (p.k1, "params.k1"), (p.k2, "params.k2")] {
            require(v >= 1, path, format!("must be at least 1, got {v}"))?;
        }
        require(p.kappa.is_finite() && p.kappa >= 0.0, "params.kappa", "must be non-negative")?;
        positive(p.eigen_periods, "params.eigen_periods")?;
        require(p.generic_p == 0 || p.generic_p >= 8, "params.generic_p", "must be 0 or at least 8")?;
        let [lo, hi] = p.generic_window;
        require(lo >= 0.0 && hi > lo, "params.generic_window", "need 0 <= start < end")?;
        p.phys.build(p.kappa).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(0.0)?;
        let mp = ModeParams::new(p.a, p.m, p.k1, p.k2, phys)?;
        let mode = solve(&mp, p.kappa)
            .context("slice-growth")?
            .ok_or_else(|| anyhow!("slice-growth: slice ({}, {}) is stable at kappa = {}", p.k1, p.k2, p.kappa))?;
        let sigma = mode.sigma;

        let mut runs = vec![("eigenvector", mode.unit_coefficients(), 0.0, p.eigen_periods / sigma, 600.0)];
        if p.generic_p > 0 {
            let c = (1..=p.generic_p).map(|q| 1.0 / q as f64).collect();
            let [lo, hi] = p.generic_window;
            runs.push(("generic", c, lo / sigma, hi / sigma, 2000.0));
        }
        let mut r = Report::new("slice-growth", &["run", "sigma", "fitted_rate", "rel_error", "window_lo", "window_hi", "fit_residual"]);
        let mut traj_rows = Vec::new();
        for (i, (name, c, lo, hi, steps)) in runs.into_iter().enumerate() {
            let s = SliceState::new(mp, p.kappa, c)?;
            let limit = 0.1 / max_generator_row_sum(&mp, p.kappa, s.c.len());
            let traj = evolve_slice(&s, limit.min(hi / steps), hi, 1).with_context(|| format!("slice-growth: {name} run"))?;
            let fit = measure_growth_rate(&traj.t, &traj.norm, (lo, hi)).with_context(|| format!("slice-growth: {name} fit"))?;
            let err = (fit.rate - sigma).abs() / sigma;
            let ln0 = traj.norm[0].ln();
            for (t, v) in traj.t.iter().zip(&traj.norm) {
                traj_rows.push(vec![name.to_string(), num(*t), num(v.ln()), num(ln0 + sigma * t)]);
            }
            let key = if name == "eigenvector" { "eigen_rel" } else { "generic_rel" };
            r.check(Check::at_most(
                &format!("{name}_growth_rate"),
                err,
                tol.get(key),
                format!("fitted {:.10} vs sigma {sigma:.10} over [{lo:.4}, {hi:.4}]", fit.rate),
            ));
            r.row(
                vec![i as f64],
                vec![name.into(), num(sigma), num(fit.rate), num(err), num(lo), num(hi), num(fit.residual)],
            );
        }
        r.file("trajectory.csv", csv_string(&["run", "t", "log_norm", "reference"], traj_rows)?);
        r.plot("trajectory.csv", "t", Some("run"), &["log_norm", "reference"]);
        r.measure("sigma", sigma);
        r.measure("truncation_p", mode.truncation_p);
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GevreyParams {
    pub n: usize,
    pub field: Vec<ModeSpec>,
    pub c_r: Vec<f64>,
    pub r: f64,
    /// Run horizon as a fraction of the analytic existence time.
    pub fraction: f64,
    pub steps: usize,
    pub phys: PhysConfig,
    /// Synthetic radius fits: `exp(−τ₀|k|)|k|^{−q}` at truncation `synthetic_n`.
    pub synthetic_n: usize,
    pub synthetic_tau: Vec<f64>,
    pub synthetic_q: Vec<f64>,
}

impl Default for GevreyParams {
    fn default() -> Self {
        Self {
            n: 8,
            field: vec![mode([1, 0, 1], 0.0, -0.05), mode([0, 1, 2], 0.03, 0.0), mode([1, 1, -1], 0.02, 0.01)],
            c_r: vec![0.5, 1.0, 2.0],
            r: 3.5,
            fraction: 0.9,
            steps: 60,
            phys: PhysConfig::default(),
            synthetic_n: 64,
            synthetic_tau: vec![0.1, 0.5, 2.0],
            synthetic_q: vec![0.0, 2.0, 4.0],
        }
    }
}

pub struct GevreyBreakdown;

impl Definition for GevreyBreakdown {
    type Params = GevreyParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[("norm_rel", 1e-12), ("radius_rel", 0.05)];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        require(p.n >= 2, "params.n", "must be at least 2")?;
        validate_modes(&p.field, p.n, "params.field")?;
        positive_list(&p.c_r, "params.c_r")?;
        require(p.r > 3.0 && p.r.is_finite(), "params.r", format!("must exceed d/2 + 3/2 = 3, got {}", p.r))?;
        require(p.fraction > 0.0 && p.fraction < 1.0, "params.fraction", "must lie in (0, 1)")?;
        require(p.steps >= 1, "params.steps", "must be at least 1")?;
        if !p.synthetic_tau.is_empty() {
            require(p.synthetic_n >= 8, "params.synthetic_n", "must be at least 8")?;
            positive_list(&p.synthetic_tau, "params.synthetic_tau")?;
            require(!p.synthetic_q.is_empty(), "params.synthetic_q", "must not be empty")?;
        }
        p.phys.build(0.0).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(0.0)?;
        let theta = build_field(&p.field, p.n)?;
        let zero = theta.zeros_like();
        let mut r = Report::new(
            "gevrey-breakdown",
            &[
                "c_r", "tau0", "K0", "t_star", "t_end", "max_norm_ratio", "tau_linear", "refined_tau", "breakdown_criterion",
                "positivity_condition", "criterion_vs_radius_disagree",
            ],
        );
        let mut tracker_rows = Vec::new();
        let (mut worst_norm, mut unsound): (f64, usize) = (0.0, 0);
        for &c_r in &p.c_r {
            let ctx = || format!("gevrey-breakdown: C_r = {c_r}");
            let w = analytic_window(&theta, c_r, p.r).with_context(ctx)?;
            let t_end = p.fraction * w.t_star;
            let dt = t_end / p.steps as f64;
            let mut cfg = NonlinearConfig::new(phys, dt, t_end);
            cfg.c_r = c_r;
            cfg.r = p.r;
            cfg.estimate_radius = false;
            let mut solver = NonlinearSolver::new(&theta, &zero, &cfg).with_context(ctx)?;
            let mut tracker = GevreyTracker::from_field(&theta, w.tau0, p.r, c_r, 1.5 * dt).with_context(ctx)?;
            let mut ratio: f64 = 1.0;
            for _ in 0..p.steps {
                solver.step().with_context(ctx)?;
                let state = solver.state();
                tracker.push(solver.time(), sobolev_a(&state)).with_context(ctx)?;
                let (tau, _) = radius_ode_linear(w.tau0, w.k0, c_r, solver.time());
                ratio = ratio.max(gevrey_norm(&state, tau, p.r).with_context(ctx)? / w.k0);
            }
            let t = solver.time();
            let rep = criterion_report(&tracker, t).with_context(ctx)?;
            worst_norm = worst_norm.max(ratio - 1.0);
            unsound += usize::from(rep.positivity_condition && rep.refined_tau <= 0.0);
            for i in 0..tracker.times().len() {
                tracker_rows.push(vec![
                    num(c_r),
                    num(tracker.times()[i]),
                    num(tracker.a_samples()[i]),
                    num(tracker.big_a()[i]),
                    num(tracker.tau()[i]),
                ]);
            }
            r.row(
                vec![c_r],
                vec![
                    num(c_r),
                    num(w.tau0),
                    num(w.k0),
                    num(w.t_star),
                    num(t),
                    num(ratio),
                    num(radius_ode_linear(w.tau0, w.k0, c_r, t).0),
                    num(rep.refined_tau),
                    rep.breakdown_criterion.to_string(),
                    rep.positivity_condition.to_string(),
                    rep.criterion_vs_radius_disagree.to_string(),
                ],
            );
        }
        r.check(Check::at_most(
            "gevrey_norm_controlled",
            worst_norm.max(0.0),
            tol.get("norm_rel"),
            format!("max ||Theta(t)||_tau(t) / K0 - 1 = {worst_norm:.2e} inside the window"),
        ));
        r.check(Check::exact(
            "positivity_implies_radius",
            unsound == 0,
            unsound as f64,
            format!("{unsound} runs where the positivity condition holds but the refined radius is not positive"),
        ));
        r.file("tracker.csv", csv_string(&["c_r", "t", "a", "A", "tau"], tracker_rows)?);
        r.plot("tracker.csv", "t", Some("c_r"), &["tau", "A"]);

        if !p.synthetic_tau.is_empty() {
            let cases: Vec<(f64, f64)> =
                p.synthetic_tau.iter().flat_map(|&t| p.synthetic_q.iter().map(move |&q| (t, q))).collect();
            let fits = cases
                .par_iter()
                .map(|&(tau0, q)| {
                    let f = SpectralField::from_fn(3, p.synthetic_n, |k| {
                        let kn = ((k[0] * k[0] + k[1] * k[1] + k[2] * k[2]) as f64).sqrt();
                        if kn == 0.0 {
                            Complex64::new(0.0, 0.0)
                        } else {
                            Complex64::new((-tau0 * kn).exp() * kn.powf(-q), 0.0)
                        }
                    });
                    let est = radius_estimate(&f).with_context(|| format!("gevrey-breakdown: synthetic tau0 = {tau0}, q = {q}"))?;
                    Ok((tau0, q, est.tau))
                })
                .collect::<Result<Vec<_>>>()?;
            let worst = fits.iter().map(|(t, _, e)| (e - t).abs() / t).fold(0.0, f64::max);
            let rows = fits.iter().map(|(t, q, e)| vec![num(*t), num(*q), num(*e), num((e - t).abs() / t)]);
            r.file("radius_fits.csv", csv_string(&["tau0", "q", "estimate", "rel_error"], rows)?);
            r.check(Check::at_most(
                "radius_estimate",
                worst,
                tol.get("radius_rel"),
                format!("worst relative radius error {worst:.2e} at N = {}", p.synthetic_n),
            ));
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipschitzParams {
    pub j: Vec<i64>,
    pub eps: f64,
    /// Defaults to `2/σ*(max j)`.
    pub t_probe: Option<f64>,
    pub a: f64,
    pub m: i64,
    pub n: usize,
    pub dt: f64,
    pub c_r: f64,
    pub r: f64,
    pub phys: PhysConfig,
}

impl Default for LipschitzParams {
    fn default() -> Self {
        Self {
            j: vec![1, 4, 9, 16],
            eps: 1e-6,
            t_probe: None,
            a: 1.0,
            m: 1,
            n: 24,
            dt: 0.02,
            c_r: 1e-3,
            r: 3.5,
            phys: PhysConfig::default(),
        }
    }
}

pub struct LipschitzBlowup;

impl Definition for LipschitzBlowup {
    type Params = LipschitzParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[("ratio_rel", 0.05)];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        positive_list(&p.j, "params.j")?;
        for (v, path) in [(p.eps, "params.eps"), (p.a, "params.a"), (p.dt, "params.dt"), (p.c_r, "params.c_r")] {
            positive(v, path)?;
        }
        if let Some(t) = p.t_probe {
            positive(t, "params.t_probe")?;
        }
        require(p.m >= 1, "params.m", "must be at least 1")?;
        require(p.n >= 4, "params.n", "must be at least 4")?;
        p.phys.build(0.0).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let cfg = LipschitzConfig {
            j_list: p.j.clone(),
            eps: p.eps,
            t_probe: p.t_probe,
            phys: p.phys.build(0.0)?,
            a: p.a,
            m: p.m,
            n: p.n,
            dt: p.dt,
            c_r: p.c_r,
            r: p.r,
        };
        let rows = lipschitz_blowup_experiment(&cfg).context("lipschitz-blowup")?;
        let mut r = Report::new(
            "lipschitz-blowup",
            &["j", "k1", "k2", "sigma", "t_probe", "ratio_nonlinear", "ratio_linear", "ratio_exponential", "t_star", "refused"],
        );
        let mut worst: f64 = 0.0;
        for row in &rows {
            let gap = row
                .ratio_nonlinear
                .map_or(f64::INFINITY, |v| (v - row.ratio_exponential).abs() / row.ratio_exponential);
            worst = worst.max(gap);
            r.row(
                vec![row.j as f64],
                vec![
                    row.j.to_string(),
                    row.k1.to_string(),
                    row.k2.to_string(),
                    num(row.sigma),
                    num(row.t_probe),
                    opt(row.ratio_nonlinear),
                    num(row.ratio_linear),
                    num(row.ratio_exponential),
                    opt(row.t_star),
                    row.refused.clone().unwrap_or_default(),
                ],
            );
        }
        let ratios: Vec<f64> = rows.iter().map(|x| x.ratio_nonlinear.unwrap_or(f64::NAN)).collect();
        let increasing = ratios.windows(2).all(|w| w[1] > w[0]) && ratios.iter().all(|v| v.is_finite());
        r.check(Check::exact(
            "ratio_increasing",
            increasing,
            f64::from(u8::from(increasing)),
            format!("nonlinear ratios {ratios:?}"),
        ));
        r.check(Check::at_most(
            "linear_surrogate",
            worst,
            tol.get("ratio_rel"),
            format!("worst relative gap to exp(sigma t_probe) {worst:.2e}"),
        ));
        r.plot("results.csv", "j", None, &["ratio_nonlinear", "ratio_linear", "ratio_exponential"]);
        r.measure("t_probe", rows.first().map(|x| x.t_probe));
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SteadyBlock {
    pub a: f64,
    pub m: i64,
    pub t_end: f64,
    pub dt: f64,
}

impl Default for SteadyBlock {
    fn default() -> Self {
        Self {
            a: 1.0,
            m: 1,
            t_end: 1.0,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderBlock {
    /// Three step sizes, each half the previous.
    pub dt: [f64; 3],
    pub t_end: f64,
}

impl Default for OrderBlock {
    fn default() -> Self {
        Self {
            dt: [0.02, 0.01, 0.005],
            t_end: 0.4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearizationBlock {
    pub a: f64,
    pub m: i64,
    pub kappa: f64,
    pub n: usize,
    pub eps: f64,
    pub threshold: f64,
    pub dt: Option<f64>,
    pub t_max: f64,
}

impl Default for LinearizationBlock {
    fn default() -> Self {
        Self {
            a: 4.0,
            m: 1,
            kappa: 0.02,
            n: 16,
            eps: 1e-6,
            threshold: 1e-3,
            dt: None,
            t_max: 400.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnergyParams {
    pub n: usize,
    pub kappa: f64,
    pub dt: f64,
    pub steps: usize,
    pub scheme: TimeScheme,
    pub field: Vec<ModeSpec>,
    pub phys: PhysConfig,
    pub steady: Option<SteadyBlock>,
    pub order: Option<OrderBlock>,
    pub linearization: Option<LinearizationBlock>,
}

impl Default for EnergyParams {
    fn default() -> Self {
        Self {
            n: 32,
            kappa: 0.1,
            dt: 0.01,
            steps: 20,
            scheme: TimeScheme::Rk4,
            field: vec![
                mode([1, 0, 1], 0.0, -0.5),
                mode([0, 1, 2], 0.3, 0.1),
                mode([1, 1, -1], -0.2, 0.25),
                mode([2, -1, 1], 0.1, 0.0),
            ],
            phys: PhysConfig::default(),
            steady: Some(SteadyBlock::default()),
            order: Some(OrderBlock::default()),
            linearization: None,
        }
    }
}

pub struct NonlinearEnergy;

impl Definition for NonlinearEnergy {
    type Params = EnergyParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[
        ("energy_rel", 1e-8),
        ("steady_drift", 1e-10),
        ("order_factor", 0.2),
        ("linearization_rate", 0.02),
    ];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        require(p.n >= 2, "params.n", "must be at least 2")?;
        positive(p.kappa, "params.kappa")?;
        positive(p.dt, "params.dt")?;
        require(p.steps >= 1, "params.steps", "must be at least 1")?;
        validate_modes(&p.field, p.n, "params.field")?;
        if let Some(s) = &p.steady {
            positive(s.a, "params.steady.a")?;
            require(s.m >= 1 && s.m as usize <= p.n, "params.steady.m", format!("must lie in [1, {}]", p.n))?;
            positive(s.t_end, "params.steady.t_end")?;
            positive(s.dt, "params.steady.dt")?;
        }
        if let Some(o) = &p.order {
            positive_list(&o.dt, "params.order.dt")?;
            positive(o.t_end, "params.order.t_end")?;
        }
        if let Some(l) = &p.linearization {
            positive(l.kappa, "params.linearization.kappa")?;
            positive(l.eps, "params.linearization.eps")?;
            require(l.threshold > l.eps, "params.linearization.threshold", "must exceed eps")?;
            positive(l.t_max, "params.linearization.t_max")?;
            require(l.n >= 4, "params.linearization.n", "must be at least 4")?;
        }
        p.phys.build(p.kappa).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(p.kappa)?;
        let theta = build_field(&p.field, p.n)?;
        let zero = theta.zeros_like();
        let mut cfg = NonlinearConfig::new(phys, p.dt, p.dt * p.steps as f64);
        cfg.scheme = p.scheme;
        cfg.estimate_radius = false;
        let ctx = "nonlinear-energy";
        let mut s = NonlinearSolver::new(&theta, &zero, &cfg).context(ctx)?;
        let mut r = Report::new("nonlinear-energy", &["step", "t", "l2_norm", "linf_norm", "energy_residual"]);
        let mut energy: f64 = 0.0;
        for step in 0..=p.steps {
            if step > 0 {
                s.step().context(ctx)?;
            }
            let smp = s.sample();
            energy = energy.max(smp.energy_residual.abs());
            r.row(
                vec![step as f64],
                vec![step.to_string(), num(smp.t), num(smp.l2_norm), num(smp.linf_norm), num(smp.energy_residual)],
            );
        }
        r.plot("results.csv", "t", None, &["l2_norm", "energy_residual"]);
        r.check(Check::at_most(
            "energy_identity",
            energy,
            tol.get("energy_rel"),
            format!("max relative energy residual {energy:.2e} at N = {}", p.n),
        ));
        let means = s.state().mean().norm().max(s.state().vertical_mean_max());
        r.measure("mean_and_vertical_mean", means);

        if let Some(st) = &p.steady {
            let theta0 = steady_state_field(st.a, st.m, p.n)?;
            let src = steady_source(&theta0, p.kappa);
            let mut c = NonlinearConfig::new(phys, st.dt, st.t_end);
            c.scheme = p.scheme;
            c.estimate_radius = false;
            let mut solver = NonlinearSolver::new(&theta0, &src, &c).context("nonlinear-energy: steady run")?;
            for _ in 0..(st.t_end / st.dt).round().max(1.0) as usize {
                solver.step().context("nonlinear-energy: steady run")?;
            }
            let drift = solver.state().sub(&theta0).l2_norm() / theta0.l2_norm();
            r.check(Check::at_most(
                "steady_state",
                drift,
                tol.get("steady_drift"),
                format!("relative drift {drift:.2e} of a sin(m x3) over t = {}", st.t_end),
            ));
        }

        if let Some(o) = &p.order {
            let run = |dt: f64| -> Result<SpectralField> {
                let mut c = NonlinearConfig::new(phys, dt, o.t_end);
                c.scheme = p.scheme;
                c.estimate_radius = false;
                let mut solver = NonlinearSolver::new(&theta, &zero, &c)?;
                for _ in 0..(o.t_end / dt).round().max(1.0) as usize {
                    solver.step()?;
                }
                Ok(solver.state())
            };
            let [a, b, c] = o.dt.map(|dt| run(dt).context("nonlinear-energy: order run"));
            let (a, b, c) = (a?, b?, c?);
            let ratio = a.sub(&b).l2_norm() / b.sub(&c).l2_norm();
            let dev = (ratio - 16.0).abs() / 16.0;
            r.check(Check::at_most(
                "time_order",
                dev,
                tol.get("order_factor"),
                format!("successive error ratio {ratio:.3} (fourth order gives 16)"),
            ));
            r.measure("order_ratio", ratio);
        }

        if let Some(l) = &p.linearization {
            let lc = LinearizationConfig {
                a: l.a,
                m: l.m,
                kappa: l.kappa,
                n: l.n,
                eps: l.eps,
                threshold: l.threshold,
                phys: p.phys.build(0.0)?,
                dt: l.dt,
                t_max: l.t_max,
            };
            let res = linearization_experiment(&lc).context("nonlinear-energy: linearization")?;
            let e_theta = (res.theta_fit.rate - res.sigma).abs() / res.sigma;
            let e_b = (res.magnetic_fit.rate - res.theta_fit.rate).abs() / res.theta_fit.rate;
            let t = tol.get("linearization_rate");
            r.check(Check::at_most(
                "linearization_theta_rate",
                e_theta,
                t,
                format!("slice ({}, {}): fitted {:.6} vs sigma {:.6}", res.k1, res.k2, res.theta_fit.rate, res.sigma),
            ));
            r.check(Check::at_most(
                "linearization_magnetic_rate",
                e_b,
                t,
                format!("b rate {:.6} vs theta rate {:.6}", res.magnetic_fit.rate, res.theta_fit.rate),
            ));
            r.check(Check::exact(
                "linearization_regime",
                res.final_perturbation > l.threshold,
                res.final_perturbation,
                format!("run reached the perturbation threshold at t = {:.3}", res.t_end),
            ));
            let rows = (0..res.t.len()).map(|i| vec![num(res.t[i]), num(res.theta_norm[i].ln()), num(res.magnetic_norm[i].ln())]);
            r.file("linearization.csv", csv_string(&["t", "log_theta", "log_b"], rows)?);
            r.plot("linearization.csv", "t", None, &[]);
            r.measure("linearization_slice", [res.k1, res.k2]);
        }
        Ok(r)
    }
}
