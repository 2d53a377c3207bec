//! Pseudo-spectral solver for `∂_tΘ + U·∇Θ = S + κΔΘ`, `U = M̂Θ̂`, on the
//! 3-torus.
//!
//! The state lives on the dealiased band `|k_i| ≤ K` with `k3 ≠ 0`;
//! `K = ⌊(n − 1)/3⌋` on the collocation grid `n = 2N + 2`, so quadratic
//! products computed on the grid are alias-free inside the band. The
//! diffusivity is `phys.kappa`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::field::SpectralField;
use crate::gevrey::{gevrey_norm, radius_estimate};
use crate::spectrum::UnstableMode;
use crate::symbols::{m_symbol, PhysicalParams, Wavevector};

use super::rk4_step;
use super::transform::Transform3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    /// Classical RK4 with explicit diffusion.
    #[default]
    Rk4,
    /// Lawson integrating-factor RK4; diffusion integrated exactly.
    IntegratingFactor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonlinearConfig {
    pub phys: PhysicalParams,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default)]
    pub scheme: TimeScheme,
    /// Estimate constant of the analytic existence time (κ = 0 only).
    #[serde(default = "default_c_r")]
    pub c_r: f64,
    /// Sobolev exponent of the Gevrey norm used for the analytic window.
    #[serde(default = "default_r")]
    pub r: f64,
    /// Minimum analyticity radius of κ = 0 initial data.
    #[serde(default = "default_min_radius")]
    pub min_radius: f64,
    #[serde(default = "default_stride")]
    pub record_stride: usize,
    #[serde(default)]
    pub snapshot_stride: Option<usize>,
    /// Fit the analyticity radius at every record (costs one pass per record).
    #[serde(default = "default_true")]
    pub estimate_radius: bool,
}

fn default_c_r() -> f64 {
    1.0
}
fn default_r() -> f64 {
    3.5
}
fn default_min_radius() -> f64 {
    0.05
}
fn default_stride() -> usize {
    1
}
fn default_true() -> bool {
    true
}

impl NonlinearConfig {
    pub fn new(phys: PhysicalParams, dt: f64, t_end: f64) -> Self {
        Self {
            phys,
            dt,
            t_end,
            scheme: TimeScheme::Rk4,
            c_r: default_c_r(),
            r: default_r(),
            min_radius: default_min_radius(),
            record_stride: 1,
            snapshot_stride: None,
            estimate_radius: true,
        }
    }
}

/// One row of the trajectory CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub l2_norm: f64,
    pub linf_norm: f64,
    pub energy_residual: f64,
    pub tau_estimate: f64,
}

/// Analytic existence window for κ = 0 data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnalyticWindow {
    pub tau0: f64,
    pub k0: f64,
    pub t_star: f64,
}

/// `T* = max_{τ₀} τ₀/(2C_r‖Θ₀‖_{τ₀})` over `τ₀` up to the estimated radius
/// (20 for entire data), by golden-section search on the log-concave ratio.
pub fn analytic_window(theta0: &SpectralField, c_r: f64, r: f64) -> Result<AnalyticWindow> {
    if !(c_r > 0.0) {
        return Err(MgError::InvalidArgument(format!("C_r = {c_r} must be positive")));
    }
    let hi = match radius_estimate(theta0) {
        Ok(e) if e.tau.is_finite() => e.tau,
        _ => 20.0,
    };
    let ratio = |tau: f64| match gevrey_norm(theta0, tau, r) {
        Ok(k) if k > 0.0 => tau / (2.0 * c_r * k),
        _ => 0.0,
    };
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (0.0, hi);
    let mut x1 = b - g * (b - a);
    let mut x2 = a + g * (b - a);
    let (mut f1, mut f2) = (ratio(x1), ratio(x2));
    for _ in 0..200 {
        if b - a <= 1e-10 * hi {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + g * (b - a);
            f2 = ratio(x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - g * (b - a);
            f1 = ratio(x1);
        }
    }
    let tau0 = 0.5 * (a + b);
    let k0 = gevrey_norm(theta0, tau0, r)?;
    Ok(AnalyticWindow {
        tau0,
        k0,
        t_star: tau0 / (2.0 * c_r * k0),
    })
}

/// `Θ₀ = a sin(m x3)` on a radius-`n` grid.
pub fn steady_state_field(a: f64, m: i64, n: usize) -> Result<SpectralField> {
    let mut f = SpectralField::zeros(3, n);
    f.set_hermitian(&[0, 0, m], Complex64::new(0.0, -a / 2.0))?;
    Ok(f)
}

/// `S = −κΔΘ₀`, the source that keeps `Θ₀(x3)` steady.
pub fn steady_source(theta0: &SpectralField, kappa: f64) -> SpectralField {
    let mut s = theta0.clone();
    for i in 0..s.coeffs().len() {
        let ksq = s.k_norm_at(i).powi(2);
        s.coeffs_mut()[i] *= kappa * ksq;
    }
    s
}

/// `sin(k1x1) sin(k2x2) Σ_p c_p sin(m p x3)` from an eigenmode, truncated to
/// `m p ≤ n` and scaled to unit L² norm.
pub fn eigenmode_field(mode: &UnstableMode, n: usize) -> Result<SpectralField> {
    let mp = &mode.params;
    if mp.k1 as usize > n || mp.k2 as usize > n {
        return Err(MgError::InvalidArgument(format!(
            "slice ({}, {}) outside the truncation N = {n}",
            mp.k1, mp.k2
        )));
    }
    let c = mode.unit_coefficients();
    let mut f = SpectralField::zeros(3, n);
    for (i, cp) in c.iter().enumerate() {
        let k3 = mp.m * (i as i64 + 1);
        if k3 as usize > n {
            break;
        }
        for s1 in [-1i64, 1] {
            for s2 in [-1i64, 1] {
                for s3 in [-1i64, 1] {
                    let v = Complex64::new(0.0, (s1 * s2 * s3) as f64 * cp / 8.0);
                    f.set(&[s1 * mp.k1, s2 * mp.k2, s3 * k3], v)?;
                }
            }
        }
    }
    let norm = f.l2_norm();
    f.scale(1.0 / norm);
    Ok(f)
}

#[derive(Debug, Clone, Copy)]
struct Mode {
    field_idx: usize,
    slot: usize,
    k: [f64; 3],
    ksq: f64,
    sym: [f64; 3],
}

/// Right-hand side evaluator with its transform buffers.
struct Rhs {
    fft: Transform3,
    modes: Vec<Mode>,
    kappa: f64,
    source: Vec<Complex64>,
    bufs: [Vec<Complex64>; 3],
    max_u: f64,
}

impl Rhs {
    /// Projected `P_K(U·∇Θ)` on the compact mode list.
    fn advection(&mut self, theta: &[Complex64], out: &mut [Complex64]) {
        let i = Complex64::new(0.0, 1.0);
        for b in self.bufs.iter_mut() {
            b.par_iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        }
        // Pack two real fields per complex transform.
        for (m, th) in self.modes.iter().zip(theta) {
            let u = [*th * m.sym[0], *th * m.sym[1], *th * m.sym[2]];
            let g = [i * m.k[0] * th, i * m.k[1] * th, i * m.k[2] * th];
            self.bufs[0][m.slot] = u[0] + i * u[1];
            self.bufs[1][m.slot] = u[2] + i * g[0];
            self.bufs[2][m.slot] = g[1] + i * g[2];
        }
        for b in self.bufs.iter_mut() {
            self.fft.to_grid(b);
        }
        let [b0, b1, b2] = &mut self.bufs;
        let max_u = b0
            .par_iter_mut()
            .zip(b1.par_iter())
            .zip(b2.par_iter())
            .map(|((z0, z1), z2)| {
                let (u1, u2, u3) = (z0.re, z0.im, z1.re);
                let prod = u1 * z1.im + u2 * z2.re + u3 * z2.im;
                *z0 = Complex64::new(prod, 0.0);
                (u1 * u1 + u2 * u2 + u3 * u3).sqrt()
            })
            .reduce(|| 0.0, f64::max);
        self.max_u = max_u;
        self.fft.to_spectral(b0);
        for (m, o) in self.modes.iter().zip(out.iter_mut()) {
            *o = b0[m.slot];
        }
    }

    /// `−P_K(U·∇Θ) + S − κ|k|²Θ̂`.
    fn full(&mut self, theta: &[Complex64], out: &mut [Complex64]) {
        self.advection(theta, out);
        for (j, o) in out.iter_mut().enumerate() {
            *o = -*o + self.source[j] - theta[j] * (self.kappa * self.modes[j].ksq);
        }
    }

    /// Advection plus source only (the integrating-factor nonlinearity).
    fn forcing(&mut self, theta: &[Complex64], out: &mut [Complex64]) {
        self.advection(theta, out);
        for (j, o) in out.iter_mut().enumerate() {
            *o = -*o + self.source[j];
        }
    }
}

/// Stepper holding the dealiased state.
pub struct NonlinearSolver {
    rhs: Rhs,
    theta: Vec<Complex64>,
    template: SpectralField,
    cfg: NonlinearConfig,
    cutoff: i64,
    t: f64,
    step: usize,
    cfl_warnings: usize,
    window: Option<AnalyticWindow>,
}

impl std::fmt::Debug for NonlinearSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NonlinearSolver")
            .field("N", &self.template.radius())
            .field("cutoff", &self.cutoff)
            .field("t", &self.t)
            .finish()
    }
}

impl NonlinearSolver {
    pub fn new(theta0: &SpectralField, source: &SpectralField, cfg: &NonlinearConfig) -> Result<Self> {
        if theta0.dim() != 3 || source.dim() != 3 {
            return Err(MgError::InvalidArgument("the nonlinear solver is three-dimensional".into()));
        }
        if source.radius() != theta0.radius() {
            return Err(MgError::InvalidArgument("source and initial data differ in truncation".into()));
        }
        if !(cfg.dt > 0.0 && cfg.t_end > 0.0) {
            return Err(MgError::InvalidArgument("dt and T must be positive".into()));
        }
        let n = theta0.radius();
        if n < 2 {
            return Err(MgError::InvalidArgument("truncation N must be at least 2".into()));
        }
        let scale = theta0.l2_norm().max(f64::MIN_POSITIVE);
        if theta0.mean().norm() > 1e-14 * scale || theta0.vertical_mean_max() > 1e-14 * scale {
            return Err(MgError::InvalidArgument(
                "initial data must have zero mean and zero vertical mean".into(),
            ));
        }
        let kappa = cfg.phys.kappa;
        let mut window = None;
        if kappa == 0.0 {
            // Too few shells above the round-off floor means the spectrum
            // drops by 14 decades within a few shells: faster than any
            // exponential, so the floor is met.
            match radius_estimate(theta0) {
                Ok(est) if est.tau < cfg.min_radius => {
                    return Err(MgError::InvalidArgument(format!(
                        "initial analyticity radius {} below the floor {}",
                        est.tau, cfg.min_radius
                    )));
                }
                Ok(_) | Err(MgError::InsufficientData(_)) => {}
                Err(e) => return Err(e),
            }
            let w = analytic_window(theta0, cfg.c_r, cfg.r)?;
            if cfg.t_end > w.t_star {
                return Err(MgError::AnalyticWindow {
                    requested: cfg.t_end,
                    limit: w.t_star,
                    c_r: cfg.c_r,
                });
            }
            window = Some(w);
        }
        let grid = 2 * n + 2;
        let cutoff = ((grid - 1) / 3) as i64;
        let fft = Transform3::new(grid);
        let mut modes = Vec::new();
        for idx in 0..theta0.coeffs().len() {
            let k = theta0.index_to_k(idx);
            if k[2] == 0 || k.iter().any(|v| v.abs() > cutoff) {
                continue;
            }
            let wv = Wavevector::from(k);
            let sym = m_symbol(wv, &cfg.phys);
            if sym.iter().any(|s| !s.is_finite()) {
                return Err(MgError::NonFiniteSymbol { k });
            }
            modes.push(Mode {
                field_idx: idx,
                slot: fft.slot(k),
                k: [k[0] as f64, k[1] as f64, k[2] as f64],
                ksq: wv.norm_sq(),
                sym,
            });
        }
        let pick = |f: &SpectralField| -> Vec<Complex64> { modes.iter().map(|m| f.coeffs()[m.field_idx]).collect() };
        let theta = pick(theta0);
        let src = pick(source);
        let kept: f64 = theta.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if (theta0.l2_norm() - kept).abs() > 1e-12 * scale {
            log::warn!(
                "initial data projected onto the dealiased band |k_i| <= {cutoff}; norm {} -> {kept}",
                theta0.l2_norm()
            );
        }
        let size = grid * grid * grid;
        Ok(Self {
            rhs: Rhs {
                fft,
                modes,
                kappa,
                source: src,
                bufs: [
                    vec![Complex64::new(0.0, 0.0); size],
                    vec![Complex64::new(0.0, 0.0); size],
                    vec![Complex64::new(0.0, 0.0); size],
                ],
                max_u: 0.0,
            },
            theta,
            template: theta0.zeros_like(),
            cfg: cfg.clone(),
            cutoff,
            t: 0.0,
            step: 0,
            cfl_warnings: 0,
            window,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// Dealiasing cutoff `K`.
    pub fn cutoff(&self) -> i64 {
        self.cutoff
    }

    pub fn cfl_warnings(&self) -> usize {
        self.cfl_warnings
    }

    pub fn analytic_window(&self) -> Option<AnalyticWindow> {
        self.window
    }

    /// Current state as a field on the original truncation.
    pub fn state(&self) -> SpectralField {
        let mut f = self.template.clone();
        for (m, c) in self.rhs.modes.iter().zip(&self.theta) {
            f.coeffs_mut()[m.field_idx] = *c;
        }
        f
    }

    /// `max_x |Θ(x)|` on the collocation grid.
    pub fn linf_norm(&mut self) -> f64 {
        let buf = &mut self.rhs.bufs[0];
        buf.par_iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        for (m, c) in self.rhs.modes.iter().zip(&self.theta) {
            buf[m.slot] = *c;
        }
        self.rhs.fft.to_grid(buf);
        buf.par_iter().map(|v| v.re.abs()).reduce(|| 0.0, f64::max)
    }

    /// `(½d‖Θ‖²/dt + κ‖∇Θ‖² − ⟨S, Θ⟩)` from the semi-discrete right side,
    /// relative to `κ‖∇Θ‖²` (or to `‖Θ‖·‖U·∇Θ‖` when κ = 0).
    pub fn energy_residual(&mut self) -> f64 {
        let n = self.theta.len();
        let mut adv = vec![Complex64::new(0.0, 0.0); n];
        let theta = self.theta.clone();
        self.rhs.advection(&theta, &mut adv);
        let mut rhs = vec![Complex64::new(0.0, 0.0); n];
        for j in 0..n {
            rhs[j] = -adv[j] + self.rhs.source[j] - theta[j] * (self.rhs.kappa * self.rhs.modes[j].ksq);
        }
        let inner = |a: &[Complex64], b: &[Complex64]| -> f64 { a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum() };
        let diss: f64 = self
            .rhs
            .modes
            .iter()
            .zip(&theta)
            .map(|(m, c)| self.rhs.kappa * m.ksq * c.norm_sqr())
            .sum();
        let resid = inner(&theta, &rhs) + diss - inner(&self.rhs.source, &theta);
        let scale = if self.rhs.kappa > 0.0 {
            diss
        } else {
            let a: f64 = theta.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            let b: f64 = adv.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            a * b
        };
        if scale > 0.0 {
            resid / scale
        } else {
            resid
        }
    }

    /// Advances one step of size `dt`.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.cfg.dt;
        match self.cfg.scheme {
            TimeScheme::Rk4 => {
                let rhs = &mut self.rhs;
                rk4_step(&mut self.theta, dt, |y, out| {
                    rhs.full(y, out);
                    Ok(())
                })?;
            }
            TimeScheme::IntegratingFactor => self.lawson_step(dt),
        }
        self.step += 1;
        self.t = self.step as f64 * dt;
        let cfl = self.rhs.max_u * dt * self.template.radius() as f64;
        if cfl > 0.5 {
            self.cfl_warnings += 1;
            // Warn once per run; later violations are counted.
            if self.cfl_warnings == 1 {
                log::warn!("CFL heuristic max|U|·dt·N = {cfl:.3} exceeds 0.5 at step {}", self.step);
            } else {
                log::debug!("CFL heuristic max|U|·dt·N = {cfl:.3} exceeds 0.5 at step {}", self.step);
            }
        }
        if self.theta.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
            return Err(MgError::Divergence { step: self.step });
        }
        Ok(())
    }

    fn lawson_step(&mut self, dt: f64) {
        let n = self.theta.len();
        let e: Vec<f64> = self
            .rhs
            .modes
            .iter()
            .map(|m| (-self.rhs.kappa * m.ksq * dt / 2.0).exp())
            .collect();
        let u = self.theta.clone();
        let zero = Complex64::new(0.0, 0.0);
        let (mut k1, mut k2, mut k3, mut k4) = (vec![zero; n], vec![zero; n], vec![zero; n], vec![zero; n]);
        let mut tmp = vec![zero; n];
        self.rhs.forcing(&u, &mut k1);
        for j in 0..n {
            tmp[j] = (u[j] + k1[j] * (dt / 2.0)) * e[j];
        }
        self.rhs.forcing(&tmp, &mut k2);
        for j in 0..n {
            tmp[j] = u[j] * e[j] + k2[j] * (dt / 2.0);
        }
        self.rhs.forcing(&tmp, &mut k3);
        for j in 0..n {
            tmp[j] = u[j] * (e[j] * e[j]) + k3[j] * (dt * e[j]);
        }
        self.rhs.forcing(&tmp, &mut k4);
        for j in 0..n {
            let e2 = e[j] * e[j];
            self.theta[j] = u[j] * e2 + (k1[j] * e2 + (k2[j] + k3[j]) * (2.0 * e[j]) + k4[j]) * (dt / 6.0);
        }
    }

    pub fn sample(&mut self) -> TrajectorySample {
        let state = self.state();
        let tau_estimate = if self.cfg.estimate_radius {
            radius_estimate(&state).map(|e| e.tau).unwrap_or(f64::NAN)
        } else {
            f64::NAN
        };
        TrajectorySample {
            t: self.t,
            l2_norm: state.l2_norm(),
            linf_norm: self.linf_norm(),
            energy_residual: self.energy_residual(),
            tau_estimate,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearRun {
    pub samples: Vec<TrajectorySample>,
    pub snapshots: Vec<(f64, SpectralField)>,
    pub final_state: SpectralField,
    pub cfl_warnings: usize,
    pub analytic_window: Option<AnalyticWindow>,
}

impl NonlinearRun {
    pub fn write_csv<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "t,l2_norm,linf_norm,energy_residual,tau_estimate")?;
        for s in &self.samples {
            writeln!(
                w,
                "{:e},{:e},{:e},{:e},{:e}",
                s.t, s.l2_norm, s.linf_norm, s.energy_residual, s.tau_estimate
            )?;
        }
        Ok(())
    }
}

/// Integrates from `theta0` to `cfg.t_end`, recording diagnostics every
/// `record_stride` steps and field snapshots every `snapshot_stride` steps.
pub fn evolve_nonlinear(theta0: &SpectralField, source: &SpectralField, cfg: &NonlinearConfig) -> Result<NonlinearRun> {
    let mut solver = NonlinearSolver::new(theta0, source, cfg)?;
    let steps = (cfg.t_end / cfg.dt).round().max(1.0) as usize;
    let stride = cfg.record_stride.max(1);
    let mut samples = vec![solver.sample()];
    let mut snapshots = Vec::new();
    if cfg.snapshot_stride.is_some() {
        snapshots.push((0.0, solver.state()));
    }
    for step in 1..=steps {
        solver.step()?;
        if step % stride == 0 || step == steps {
            samples.push(solver.sample());
        }
        if let Some(s) = cfg.snapshot_stride {
            if s > 0 && step % s == 0 {
                snapshots.push((solver.time(), solver.state()));
            }
        }
    }
    Ok(NonlinearRun {
        samples,
        snapshots,
        final_state: solver.state(),
        cfl_warnings: solver.cfl_warnings(),
        analytic_window: solver.analytic_window(),
    })
}
