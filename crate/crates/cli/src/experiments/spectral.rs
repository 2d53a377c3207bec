use anyhow::{Context, Result};
use mg_core::evolution::{embed_restricted, evolve_full_slice, full_slice_step_limit, measure_growth_rate, sine_steady_state, SliceState};
use mg_core::spectrum::{
    diffusive_sweep, dynamo_bound, growth_bound_constant, optimal_diffusive_mode, predicted_optimum, solve,
    solve_growth_rate, truncated_matrix_eigenvalue, ModeParams,
};
use mg_core::symbols::{divergence_residual, m_norm, m_symbol, t_contraction_residual, Wavevector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Definition;
use crate::config::{positive, positive_list, require, ConfigError, PhysConfig, Tolerances};
use crate::report::{num, opt, Check, Report};

fn grid_default() -> Vec<i64> {
    vec![1, 2, 4]
}

/// Cartesian product `(a, m, k1, k2)` in lexicographic order.
fn cells(a: &[f64], m: &[i64], k1: &[i64], k2: &[i64]) -> Vec<(f64, i64, i64, i64)> {
    let mut out = Vec::new();
    for &a in a {
        for &m in m {
            for &k1 in k1 {
                for &k2 in k2 {
                    out.push((a, m, k1, k2));
                }
            }
        }
    }
    out
}

fn validate_grid(a: &[f64], m: &[i64], k1: &[i64], k2: &[i64]) -> Result<(), ConfigError> {
    positive_list(a, "params.a")?;
    positive_list(m, "params.m")?;
    positive_list(k1, "params.k1")?;
    positive_list(k2, "params.k2")
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmaTableParams {
    pub a: Vec<f64>,
    pub m: Vec<i64>,
    pub k1: Vec<i64>,
    pub k2: Vec<i64>,
    pub phys: PhysConfig,
}

impl Default for SigmaTableParams {
    fn default() -> Self {
        Self {
            a: vec![1.0, 2.0, 4.0],
            m: grid_default(),
            k1: grid_default(),
            k2: grid_default(),
            phys: PhysConfig::default(),
        }
    }
}

pub struct SigmaTable;

impl Definition for SigmaTable {
    type Params = SigmaTableParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[("residual_rel", 1e-12)];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        validate_grid(&p.a, &p.m, &p.k1, &p.k2)?;
        p.phys.build(0.0).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(0.0)?;
        let modes = cells(&p.a, &p.m, &p.k1, &p.k2)
            .into_par_iter()
            .map(|(a, m, k1, k2)| {
                let mp = ModeParams::new(a, m, k1, k2, phys)?;
                solve_growth_rate(&mp).with_context(|| format!("sigma-table: a = {a}, m = {m}, k1 = {k1}, k2 = {k2}"))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut r = Report::new(
            "sigma-table",
            &["a", "m", "k1", "k2", "alpha1", "alpha2", "bracket_lo", "bracket_hi", "sigma", "residual_rel", "P", "inside"],
        );
        let mut outside = 0;
        let mut worst: f64 = 0.0;
        for mode in &modes {
            let mp = mode.params;
            let inside = mode.bracket_lo() < mode.sigma && mode.sigma < mode.bracket_hi();
            outside += usize::from(!inside);
            let rel = mode.residual / mp.alpha(1);
            worst = worst.max(rel);
            r.row(
                vec![mp.a, mp.m as f64, mp.k1 as f64, mp.k2 as f64],
                vec![
                    num(mp.a),
                    mp.m.to_string(),
                    mp.k1.to_string(),
                    mp.k2.to_string(),
                    num(mp.alpha(1)),
                    num(mp.alpha(2)),
                    num(mode.bracket_lo()),
                    num(mode.bracket_hi()),
                    num(mode.sigma),
                    num(rel),
                    mode.truncation_p.to_string(),
                    inside.to_string(),
                ],
            );
        }
        r.check(Check::exact(
            "bracket_containment",
            outside == 0,
            outside as f64,
            format!("{outside} of {} roots outside the open bracket", modes.len()),
        ));
        let t = tol.get("residual_rel");
        r.check(Check::at_most("bisection_residual", worst, t, format!("worst residual / alpha1 {worst:.2e}")));
        r.measure("rows", modes.len());
        r.measure("worst_residual_rel", worst);
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleParams {
    pub a: Vec<f64>,
    pub m: Vec<i64>,
    pub k1: Vec<i64>,
    pub k2: Vec<i64>,
    pub kappa: Vec<f64>,
    /// Truncation of the matrix oracle.
    pub p_max: usize,
    pub phys: PhysConfig,
}

impl Default for OracleParams {
    fn default() -> Self {
        let s = SigmaTableParams::default();
        Self {
            a: s.a,
            m: s.m,
            k1: s.k1,
            k2: s.k2,
            kappa: vec![0.0, 1e-3],
            p_max: 128,
            phys: PhysConfig::default(),
        }
    }
}

pub struct OracleXcheck;

impl Definition for OracleXcheck {
    type Params = OracleParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[("rel_gap", 1e-8)];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        validate_grid(&p.a, &p.m, &p.k1, &p.k2)?;
        require(!p.kappa.is_empty(), "params.kappa", "must not be empty")?;
        for (i, k) in p.kappa.iter().enumerate() {
            require(k.is_finite() && *k >= 0.0, &format!("params.kappa[{i}]"), format!("must be non-negative, got {k}"))?;
        }
        require(p.p_max >= 8, "params.p_max", format!("must be at least 8, got {}", p.p_max))?;
        p.phys.build(0.0).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(0.0)?;
        let jobs: Vec<(f64, (f64, i64, i64, i64))> = p
            .kappa
            .iter()
            .flat_map(|&k| cells(&p.a, &p.m, &p.k1, &p.k2).into_iter().map(move |c| (k, c)))
            .collect();
        let out = jobs
            .into_par_iter()
            .map(|(kappa, (a, m, k1, k2))| {
                let ctx = || format!("oracle-xcheck: kappa = {kappa}, a = {a}, m = {m}, k1 = {k1}, k2 = {k2}");
                let mp = ModeParams::new(a, m, k1, k2, phys)?;
                let mat = truncated_matrix_eigenvalue(&mp, kappa, p.p_max).with_context(ctx)?;
                let cf = solve(&mp, kappa).with_context(ctx)?.map(|m| m.sigma);
                Ok((kappa, mp, cf, mat))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut r = Report::new(
            "oracle-xcheck",
            &["kappa", "a", "m", "k1", "k2", "sigma_cf", "sigma_matrix", "rel_gap"],
        );
        let (mut worst, mut stable, mut mismatched): (f64, usize, usize) = (0.0, 0, 0);
        for (kappa, mp, cf, mat) in &out {
            let gap = cf.map(|s| (s - mat).abs() / s);
            match (cf, gap) {
                (Some(_), Some(g)) => worst = worst.max(g),
                _ if *mat < 0.0 => stable += 1,
                _ => mismatched += 1,
            }
            r.row(
                vec![*kappa, mp.a, mp.m as f64, mp.k1 as f64, mp.k2 as f64],
                vec![
                    num(*kappa),
                    num(mp.a),
                    mp.m.to_string(),
                    mp.k1.to_string(),
                    mp.k2.to_string(),
                    opt(*cf),
                    num(*mat),
                    opt(gap),
                ],
            );
        }
        r.check(Check::at_most(
            "cf_vs_matrix",
            worst,
            tol.get("rel_gap"),
            format!("worst relative gap {worst:.2e} at P = {}", p.p_max),
        ));
        r.check(Check::exact(
            "stable_cells_agree",
            mismatched == 0,
            mismatched as f64,
            format!("{stable} cells stable in both, {mismatched} with a positive matrix eigenvalue but no root"),
        ));
        r.measure("worst_rel_gap", worst);
        r.measure("stable_cells", stable);
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IllposedParams {
    /// Perfect squares; the slice is `(k1, k2) = (j, √j)`.
    pub j: Vec<i64>,
    pub a: f64,
    pub m: i64,
    pub phys: PhysConfig,
}

impl Default for IllposedParams {
    fn default() -> Self {
        Self {
            j: vec![1, 4, 9, 16, 25, 36, 49, 64],
            a: 1.0,
            m: 1,
            phys: PhysConfig::default(),
        }
    }
}

fn integer_sqrt(j: i64) -> Option<i64> {
    let r = (j as f64).sqrt().round() as i64;
    (r * r == j).then_some(r)
}

pub struct IllposedScaling;

impl Definition for IllposedScaling {
    type Params = IllposedParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        positive_list(&p.j, "params.j")?;
        for (i, j) in p.j.iter().enumerate() {
            require(integer_sqrt(*j).is_some(), &format!("params.j[{i}]"), format!("{j} is not a perfect square"))?;
        }
        positive(p.a, "params.a")?;
        require(p.m >= 1, "params.m", "must be at least 1")?;
        p.phys.build(0.0).map(|_| ())
    }

    fn run(p: &Self::Params, _tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(0.0)?;
        let c = growth_bound_constant(p.a, p.m as f64, &phys);
        let mut js = p.j.clone();
        js.sort_unstable();
        js.dedup();
        let rates = js
            .par_iter()
            .map(|&j| {
                let mp = ModeParams::new(p.a, p.m, j, integer_sqrt(j).expect("validated"), phys)?;
                Ok(solve_growth_rate(&mp).with_context(|| format!("illposed-scaling: j = {j}"))?.sigma)
            })
            .collect::<Result<Vec<f64>>>()?;
        let mut r = Report::new("illposed-scaling", &["j", "k1", "k2", "sigma", "sigma_over_j", "bound_constant", "above_bound"]);
        let mut min_ratio = f64::INFINITY;
        for (&j, &s) in js.iter().zip(&rates) {
            let ratio = s / (j as f64 * c);
            min_ratio = min_ratio.min(ratio);
            r.row(
                vec![j as f64],
                vec![
                    j.to_string(),
                    j.to_string(),
                    integer_sqrt(j).unwrap().to_string(),
                    num(s),
                    num(s / j as f64),
                    num(c),
                    (ratio > 1.0).to_string(),
                ],
            );
        }
        let increasing = rates.windows(2).all(|w| w[1] > w[0]);
        r.check(Check::exact(
            "above_growth_bound",
            min_ratio > 1.0,
            min_ratio,
            format!("min sigma/(j C) = {min_ratio:.4} with C = {c:.6e}"),
        ));
        r.check(Check::exact(
            "strictly_increasing",
            increasing,
            f64::from(u8::from(increasing)),
            format!("sigma over j = {js:?}: {rates:?}"),
        ));
        r.plot("results.csv", "j", None, &["sigma"]);
        r.measure("bound_constant", c);
        r.measure("min_ratio_to_bound", min_ratio);
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepParams {
    pub kappa: f64,
    pub a: f64,
    pub m: i64,
    /// Search box; defaults to four times the predicted optimum.
    pub k1_max: Option<i64>,
    pub k2_max: Option<i64>,
    pub phys: PhysConfig,
}

impl Default for SweepParams {
    fn default() -> Self {
        Self {
            kappa: 1e-2,
            a: 4.0,
            m: 1,
            k1_max: None,
            k2_max: None,
            phys: PhysConfig::default(),
        }
    }
}

fn default_box(kappa: f64, a: f64, m: i64, phys: &mg_core::PhysicalParams) -> (i64, i64) {
    let (p1, p2) = predicted_optimum(kappa, a, m as f64, phys);
    ((4.0 * p1).ceil() as i64, (4.0 * p2).ceil() as i64)
}

/// `max(x/y, y/x)`.
fn factor(x: f64, y: f64) -> f64 {
    (x / y).max(y / x)
}

pub struct DiffusiveSweep;

impl Definition for DiffusiveSweep {
    type Params = SweepParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[("argmax_factor", 2.0)];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        positive(p.kappa, "params.kappa")?;
        positive(p.a, "params.a")?;
        require(p.m >= 1, "params.m", "must be at least 1")?;
        for (v, path) in [(p.k1_max, "params.k1_max"), (p.k2_max, "params.k2_max")] {
            if let Some(v) = v {
                require(v >= 1, path, format!("must be at least 1, got {v}"))?;
            }
        }
        p.phys.build(0.0).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(0.0)?;
        let (b1, b2) = default_box(p.kappa, p.a, p.m, &phys);
        let (k1_max, k2_max) = (p.k1_max.unwrap_or(b1), p.k2_max.unwrap_or(b2));
        let sweep = diffusive_sweep(p.kappa, p.a, p.m, &phys, k1_max, k2_max).context("diffusive-sweep")?;
        let mut r = Report::new("diffusive-sweep", &["k1", "k2", "sigma"]);
        let mut best: Option<(f64, i64, i64)> = None;
        for pt in &sweep {
            if let Some(s) = pt.sigma {
                if best.map_or(true, |b| s > b.0) {
                    best = Some((s, pt.k1, pt.k2));
                }
            }
            r.row(vec![pt.k1 as f64, pt.k2 as f64], vec![pt.k1.to_string(), pt.k2.to_string(), opt(pt.sigma)]);
        }
        r.plot("results.csv", "k1", Some("k2"), &["sigma"]);
        let (p1, p2) = predicted_optimum(p.kappa, p.a, p.m as f64, &phys);
        let bound = dynamo_bound(p.kappa, p.a, &phys);
        r.measure("search_box", [k1_max, k2_max]);
        r.measure("predicted_argmax", [p1, p2]);
        r.measure("dynamo_bound", bound);
        match best {
            Some((s, k1, k2)) => {
                let f = factor(k1 as f64, p1).max(factor(k2 as f64, p2));
                r.check(Check::exact(
                    "dynamo_bound",
                    s >= bound,
                    s / bound,
                    format!("sigma_max {s:.6} vs a^2/(1024 Omega^2 kappa) = {bound:.6}"),
                ));
                r.check(Check::at_most(
                    "argmax_location",
                    f,
                    tol.get("argmax_factor"),
                    format!("argmax ({k1}, {k2}) vs predicted ({p1:.2}, {p2:.2})"),
                ));
                r.measure("sigma_max", s);
                r.measure("argmax", [k1, k2]);
            }
            None => r.check(Check::exact("dynamo_bound", false, 0.0, "no unstable slice in the box".into())),
        }
        Ok(r)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynamoParams {
    pub kappa: Vec<f64>,
    pub a: f64,
    pub m: i64,
    pub phys: PhysConfig,
    /// Evolve the optimal eigenmode and compare the growth of `b` and `θ`.
    pub magnetic: bool,
    /// Horizon of the magnetic run in units of `1/σ*`.
    pub growth_periods: f64,
    pub samples: usize,
}

impl Default for DynamoParams {
    fn default() -> Self {
        Self {
            kappa: vec![1e-2, 3e-3, 1e-3],
            a: 4.0,
            m: 1,
            phys: PhysConfig::default(),
            magnetic: true,
            growth_periods: 3.0,
            samples: 40,
        }
    }
}

pub struct DynamoScaling;

impl Definition for DynamoScaling {
    type Params = DynamoParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[("argmax_factor", 2.0), ("rate_rel", 0.02)];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        positive_list(&p.kappa, "params.kappa")?;
        positive(p.a, "params.a")?;
        require(p.m >= 1, "params.m", "must be at least 1")?;
        positive(p.growth_periods, "params.growth_periods")?;
        require(p.samples >= 10, "params.samples", "need at least 10 samples for a growth fit")?;
        p.phys.build(0.0).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(0.0)?;
        let mut r = Report::new(
            "dynamo-scaling",
            &[
                "kappa", "k1", "k2", "k1_predicted", "k2_predicted", "sigma", "dynamo_bound", "sigma_kappa", "theta_rate",
                "magnetic_rate",
            ],
        );
        let mut growth = csv::Writer::from_writer(Vec::new());
        growth.write_record(["kappa", "t", "log_theta", "log_b"])?;
        let (mut worst_f, mut worst_rate, mut min_bound): (f64, f64, f64) = (0.0, 0.0, f64::INFINITY);
        let mut sk = Vec::new();
        for &kappa in &p.kappa {
            let ctx = || format!("dynamo-scaling: kappa = {kappa}");
            let (b1, b2) = default_box(kappa, p.a, p.m, &phys);
            let best = optimal_diffusive_mode(kappa, p.a, p.m, &phys, b1, b2).with_context(ctx)?;
            let f = factor(best.k1 as f64, best.k1_predicted).max(factor(best.k2 as f64, best.k2_predicted));
            worst_f = worst_f.max(f);
            min_bound = min_bound.min(best.mode.sigma / best.dynamo_bound);
            sk.push(best.mode.sigma * kappa);
            let rates = if p.magnetic {
                let (tr, br, series) = magnetic_growth(&best.mode, p).with_context(ctx)?;
                for (t, lt, lb) in series {
                    growth.write_record([num(kappa), num(t), num(lt), num(lb)])?;
                }
                worst_rate = worst_rate
                    .max((tr - best.mode.sigma).abs() / best.mode.sigma)
                    .max((br - tr).abs() / tr);
                Some((tr, br))
            } else {
                None
            };
            r.row(
                vec![kappa],
                vec![
                    num(kappa),
                    best.k1.to_string(),
                    best.k2.to_string(),
                    num(best.k1_predicted),
                    num(best.k2_predicted),
                    num(best.mode.sigma),
                    num(best.dynamo_bound),
                    num(best.mode.sigma * kappa),
                    opt(rates.map(|x| x.0)),
                    opt(rates.map(|x| x.1)),
                ],
            );
        }
        r.check(Check::exact(
            "dynamo_bound",
            min_bound >= 1.0,
            min_bound,
            format!("min sigma_max / (a^2/(1024 Omega^2 kappa)) = {min_bound:.4}"),
        ));
        r.check(Check::at_most(
            "argmax_location",
            worst_f,
            tol.get("argmax_factor"),
            format!("worst factor between argmax and prediction {worst_f:.3}"),
        ));
        if p.magnetic {
            r.check(Check::at_most(
                "magnetic_growth_rate",
                worst_rate,
                tol.get("rate_rel"),
                format!("worst relative mismatch among sigma, theta rate and b rate {worst_rate:.2e}"),
            ));
            r.file("dynamo_growth.csv", String::from_utf8(growth.into_inner()?)?);
            r.plot("dynamo_growth.csv", "t", Some("kappa"), &["log_theta", "log_b"]);
        }
        let (lo, hi) = sk.iter().fold((f64::INFINITY, 0.0f64), |(l, h), v| (l.min(*v), h.max(*v)));
        r.measure("sigma_kappa_spread", hi / lo);
        Ok(r)
    }
}

type GrowthSeries = Vec<(f64, f64, f64)>;

/// Linear full-slice evolution of the eigenmode, sampling `‖θ‖` and `‖b‖`.
fn magnetic_growth(mode: &mg_core::UnstableMode, p: &DynamoParams) -> Result<(f64, f64, GrowthSeries)> {
    let slice = SliceState::new(mode.params, mode.kappa, mode.unit_coefficients())?;
    let mut state = embed_restricted(&slice);
    let steady = sine_steady_state(mode.params.a, mode.params.m);
    let horizon = p.growth_periods / mode.sigma;
    let chunk = horizon / p.samples as f64;
    let dt = full_slice_step_limit(&state, &steady).min(chunk / 4.0);
    let mut series = vec![(state.t, state.norm().ln(), state.magnetic_norm().ln())];
    let (mut t, mut th, mut b) = (vec![state.t], vec![state.norm()], vec![state.magnetic_norm()]);
    for _ in 0..p.samples {
        let steps = (chunk / dt).ceil();
        state = evolve_full_slice(&state, &steady, chunk / steps, chunk)?.final_state;
        series.push((state.t, state.norm().ln(), state.magnetic_norm().ln()));
        t.push(state.t);
        th.push(state.norm());
        b.push(state.magnetic_norm());
    }
    let window = (0.0, f64::INFINITY);
    let tr = measure_growth_rate(&t, &th, window)?.rate;
    let br = measure_growth_rate(&t, &b, window)?.rate;
    Ok((tr, br, series))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SymbolParams {
    /// Box `|k|∞ ≤ k_max`.
    pub k_max: i64,
    pub phys: PhysConfig,
}

impl Default for SymbolParams {
    fn default() -> Self {
        Self {
            k_max: 4,
            phys: PhysConfig::default(),
        }
    }
}

pub struct Symbols;

impl Definition for Symbols {
    type Params = SymbolParams;
    const TOLERANCES: &'static [(&'static str, f64)] = &[("identity_rel", 1e-13)];

    fn validate(p: &Self::Params) -> Result<(), ConfigError> {
        require((1..=256).contains(&p.k_max), "params.k_max", format!("must be in [1, 256], got {}", p.k_max))?;
        p.phys.build(0.0).map(|_| ())
    }

    fn run(p: &Self::Params, tol: &Tolerances) -> Result<Report> {
        let phys = p.phys.build(0.0)?;
        let n = p.k_max;
        let mut r = Report::new("symbols", &["k1", "k2", "k3", "M1", "M2", "M3"]);
        let mut worst: f64 = 0.0;
        for k1 in -n..=n {
            for k2 in -n..=n {
                for k3 in -n..=n {
                    let k = Wavevector::new(k1, k2, k3);
                    let m = m_symbol(k, &phys);
                    let scale = m_norm(k, &phys) * k.norm();
                    if scale > 0.0 {
                        let d = divergence_residual(k, &phys).abs().max(t_contraction_residual(k, &phys).norm());
                        worst = worst.max(d / scale);
                    }
                    r.row(
                        vec![k1 as f64, k2 as f64, k3 as f64],
                        vec![k1.to_string(), k2.to_string(), k3.to_string(), num(m[0]), num(m[1]), num(m[2])],
                    );
                }
            }
        }
        r.check(Check::at_most(
            "symbol_identities",
            worst,
            tol.get("identity_rel"),
            format!("worst relative k.M and k.T.k residual {worst:.2e}"),
        ));
        Ok(r)
    }
}
