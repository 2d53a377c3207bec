//! Unstable eigenvalues of the MG operator linearised about `a sin(m x3)`.
//!
//! On the Fourier slice `sin(k1 x1) sin(k2 x2) Σ_p c̃_p sin(m p x3)` the
//! linearised equation reduces to the three-term recurrence
//!
//! ```text
//! σ_p c̃_p + c̃_{p+1}/α_{p+1} + c̃_{p-1}/α_{p-1} = 0,   σ_p = σ + κ(k1² + k2² + m²p²)
//! ```
//!
//! whose characteristic equation is the continued fraction
//! `σ_1 α_1 = F_2(σ)`, `F_p = 1/(σ_p α_p − F_{p+1})`.
//!
//! The root is located by bisection on the sign of `h(σ) = σ_1 α_1 − F_2(σ)`.
//! A non-positive denominator in the backward recurrence means `σ` lies
//! below the largest eigenvalue of the tail operator (the denominators are
//! the scaled pivots of an `LDLᵀ` factorisation of the symmetrised
//! operator, so their signs count eigenvalues above `σ`); such points are
//! on the unstable side of the root and bisection treats them that way.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::symbols::PhysicalParams;

/// Default backward-recurrence depth; doubled until convergence.
pub const DEFAULT_DEPTH: usize = 64;
const DEPTH_TOL: f64 = 1e-14;
const MAX_DEPTH: usize = 1 << 14;
/// Relative magnitude below which the eigenvector is truncated.
const EIGENVECTOR_FLOOR_LN: f64 = -690.775_527_898_213_7; // ln(1e-300)
const MAX_EIGENVECTOR_LEN: usize = 4096;
/// Number of geometric scan points for the diffusive root search.
pub const DIFFUSIVE_SCAN_POINTS: usize = 256;
const DIFFUSIVE_SCAN_DECADES: f64 = 12.0;

/// Steady-state amplitude, vertical modulation and horizontal wavenumbers of
/// one eigenmode slice.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeParams {
    pub a: f64,
    pub m: i64,
    pub k1: i64,
    pub k2: i64,
    pub phys: PhysicalParams,
}

impl ModeParams {
    pub fn new(a: f64, m: i64, k1: i64, k2: i64, phys: PhysicalParams) -> Result<Self> {
        if !(a.is_finite() && a > 0.0) {
            return Err(MgError::InvalidArgument(format!("amplitude a = {a} must be positive")));
        }
        if m < 1 || k1 < 1 || k2 < 1 {
            return Err(MgError::InvalidArgument(format!(
                "m, k1, k2 must be positive integers (got {m}, {k1}, {k2})"
            )));
        }
        Ok(Self { a, m, k1, k2, phys })
    }

    /// Unit physical parameters `Ω = μ = 1`.
    pub fn unit(a: f64, m: i64, k1: i64, k2: i64) -> Result<Self> {
        Self::new(a, m, k1, k2, PhysicalParams::default())
    }

    /// `k1² + k2²`.
    pub fn horizontal_sq(&self) -> f64 {
        (self.k1 * self.k1 + self.k2 * self.k2) as f64
    }

    /// `α_p`, the inverse coupling strength of level `p`.
    pub fn alpha(&self, p: usize) -> f64 {
        let om = self.phys.omega;
        let mu = self.phys.mu;
        let h = self.horizontal_sq();
        let n = (self.m as f64) * p as f64;
        let k2sq = (self.k2 * self.k2) as f64;
        (8.0 * om * om * n * n * (h + n * n) + 2.0 * mu * mu * k2sq * k2sq)
            / (self.a * mu * self.m as f64 * k2sq * h)
    }

    /// Diagonal damping `κ(k1² + k2² + m²p²)` of level `p`.
    pub fn damping(&self, p: usize, kappa: f64) -> f64 {
        let n = (self.m as f64) * p as f64;
        kappa * (self.horizontal_sq() + n * n)
    }

    /// `σ_p α_p`, the level coefficient of the continued fraction.
    pub fn level(&self, p: usize, sigma: f64, kappa: f64) -> f64 {
        (sigma + self.damping(p, kappa)) * self.alpha(p)
    }

    /// Analytic bracket `(1/√(α₁α₂), 1/√(α₁α₂ − α₁²))` for the κ = 0 root.
    pub fn bracket(&self) -> (f64, f64) {
        let a1 = self.alpha(1);
        let a2 = self.alpha(2);
        (1.0 / (a1 * a2).sqrt(), 1.0 / (a1 * a2 - a1 * a1).sqrt())
    }
}

/// Closed form of the constant-coefficient tail `G = 1/(s − G)` for a level
/// coefficient `s ≥ 2`.
fn g_of_level(s: f64) -> Option<f64> {
    if s >= 2.0 {
        Some(2.0 / (s + (s * s - 4.0).max(0.0).sqrt()))
    } else {
        None
    }
}

/// `G_p(σ) = (σα_p − √(σ²α_p² − 4))/2`.
pub fn g_closed_form(p: usize, sigma: f64, mp: &ModeParams) -> Result<f64> {
    if p < 1 {
        return Err(MgError::InvalidArgument("level p must be at least 1".into()));
    }
    let s = sigma * mp.alpha(p);
    g_of_level(s).ok_or_else(|| {
        MgError::Domain(format!(
            "σ = {sigma:e} is below 2/α_{p} = {:e} (negative discriminant)",
            2.0 / mp.alpha(p)
        ))
    })
}

/// `F_p(σ)` by backward recurrence from level `p + depth`.
///
/// The tail is seeded with `G` at the deepest level when `σ_L α_L ≥ 2`, else
/// with zero. `kappa = 0` gives the non-diffusive fraction.
pub fn f_continued_fraction(
    p: usize,
    sigma: f64,
    mp: &ModeParams,
    depth: usize,
    kappa: f64,
) -> Result<f64> {
    if p < 1 {
        return Err(MgError::InvalidArgument("level p must be at least 1".into()));
    }
    if depth < p + 4 {
        return Err(MgError::InvalidArgument(format!(
            "depth {depth} must be at least p + 4 = {}",
            p + 4
        )));
    }
    let deepest = p + depth;
    let mut tail = g_of_level(mp.level(deepest, sigma, kappa)).unwrap_or(0.0);
    for q in (p..deepest).rev() {
        let d = mp.level(q, sigma, kappa) - tail;
        if !(d > 0.0) {
            return Err(MgError::Pole { level: q, denominator: d });
        }
        tail = 1.0 / d;
    }
    Ok(tail)
}

/// [`f_continued_fraction`] with the depth doubled from
/// `max(DEFAULT_DEPTH, p + 4)` until two evaluations agree to 1e-14.
pub fn f_adaptive(p: usize, sigma: f64, mp: &ModeParams, kappa: f64) -> Result<f64> {
    let mut depth = DEFAULT_DEPTH.max(p + 4);
    let mut prev = f_continued_fraction(p, sigma, mp, depth, kappa)?;
    while depth < MAX_DEPTH {
        depth *= 2;
        let next = f_continued_fraction(p, sigma, mp, depth, kappa)?;
        if (next - prev).abs() <= DEPTH_TOL * next.abs() {
            return Ok(next);
        }
        prev = next;
    }
    log::warn!("continued fraction at σ = {sigma:e} not converged at depth {depth}");
    Ok(prev)
}

/// `h(σ) = σ₁α₁ − F₂(σ)`; a pole in `F₂` is reported as an error.
pub fn characteristic(sigma: f64, mp: &ModeParams, kappa: f64) -> Result<f64> {
    Ok(mp.level(1, sigma, kappa) - f_adaptive(2, sigma, mp, kappa)?)
}

/// Whether `σ` lies above the root (positive `h`, no tail pole).
fn above_root(sigma: f64, mp: &ModeParams, kappa: f64) -> bool {
    matches!(characteristic(sigma, mp, kappa), Ok(h) if h > 0.0)
}

/// Bisection on `[lo, hi]` given `lo` below and `hi` above the root.
/// Returns the endpoint with the smaller valid residual.
fn bisect(mut lo: f64, mut hi: f64, mp: &ModeParams, kappa: f64) -> Result<(f64, f64)> {
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if above_root(mid, mp, kappa) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let h_hi = characteristic(hi, mp, kappa)?;
    match characteristic(lo, mp, kappa) {
        Ok(h_lo) if h_lo.abs() < h_hi.abs() => Ok((lo, h_lo.abs())),
        _ => Ok((hi, h_hi.abs())),
    }
}

/// Growth rate, its bracket and the eigenvector of the recurrence.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnstableMode {
    pub params: ModeParams,
    pub kappa: f64,
    pub sigma: f64,
    /// `[lo, hi]`: the analytic bracket for κ = 0; for κ > 0 the diffusive
    /// lower-bound expression (possibly negative) and the κ = 0 upper end.
    pub bracket: [f64; 2],
    /// `|σ₁α₁ − F₂(σ)|` at the returned root.
    pub residual: f64,
    #[serde(rename = "P")]
    pub truncation_p: usize,
    /// `η_p`, `p = 2..=P` (index 0 is `η_2`).
    pub eta: Vec<f64>,
    /// `c̃_p`, `p = 1..=P`, with `c̃₁ = α₁`; entries below the double range are 0.
    pub c_tilde: Vec<f64>,
    /// `log10 |c̃_p|`, free of underflow.
    pub c_tilde_log10: Vec<f64>,
}

impl UnstableMode {
    pub fn bracket_lo(&self) -> f64 {
        self.bracket[0]
    }

    pub fn bracket_hi(&self) -> f64 {
        self.bracket[1]
    }

    /// Sign of `c̃_p`: the `η_q` are negative, so signs alternate.
    pub fn c_tilde_sign(p: usize) -> f64 {
        if p % 2 == 1 {
            1.0
        } else {
            -1.0
        }
    }

    /// Copy of `c̃` scaled to unit Euclidean norm.
    pub fn unit_coefficients(&self) -> Vec<f64> {
        unit_from_log(&self.c_tilde_log10)
    }

    /// `|σ c̃_p + c̃_{p+1}/α_{p+1} + c̃_{p−1}/α_{p−1}| / (σ |c̃_p|)` in
    /// scale-free form `|σ_pα_p + η_{p+1} + 1/η_p| / (σ α_p)` for `p ≥ 2`, and
    /// `|σ₁α₁ + η₂|/(σα₁)` for `p = 1`.
    pub fn recurrence_residuals(&self) -> Vec<f64> {
        let mp = &self.params;
        let mut out = Vec::with_capacity(self.eta.len());
        let s1 = mp.level(1, self.sigma, self.kappa);
        out.push((s1 + self.eta[0]).abs() / (self.sigma * mp.alpha(1)));
        for p in 2..self.truncation_p {
            let eta_p = self.eta[p - 2];
            let eta_next = self.eta[p - 1];
            let sp = mp.level(p, self.sigma, self.kappa);
            out.push((sp + eta_next + 1.0 / eta_p).abs() / (self.sigma * mp.alpha(p)));
        }
        out
    }
}

fn unit_from_log(log10: &[f64]) -> Vec<f64> {
    let top = log10.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let scaled: Vec<f64> = log10
        .iter()
        .enumerate()
        .map(|(i, l)| UnstableMode::c_tilde_sign(i + 1) * 10f64.powf(l - top))
        .collect();
    let norm = scaled.iter().map(|v| v * v).sum::<f64>().sqrt();
    scaled.into_iter().map(|v| v / norm).collect()
}

/// Eigenvector data at a converged root.
fn eigenvector(mp: &ModeParams, sigma: f64, kappa: f64) -> Result<(usize, Vec<f64>, Vec<f64>)> {
    let mut depth = 128usize;
    loop {
        // F_q for q = 2..=depth by one backward sweep.
        let deepest = depth + DEFAULT_DEPTH;
        let mut f = vec![0.0; deepest + 1];
        let mut tail = g_of_level(mp.level(deepest, sigma, kappa)).unwrap_or(0.0);
        for q in (2..deepest).rev() {
            let d = mp.level(q, sigma, kappa) - tail;
            if !(d > 0.0) {
                return Err(MgError::Pole { level: q, denominator: d });
            }
            tail = 1.0 / d;
            f[q] = tail;
        }
        let ln10 = std::f64::consts::LN_10;
        let mut logs = vec![mp.alpha(1).log10()];
        let mut prod_ln = 0.0;
        let mut top = logs[0] * ln10;
        let mut cut = None;
        for p in 2..=depth {
            prod_ln += f[p].ln();
            let ln_c = mp.alpha(p).ln() + prod_ln;
            top = top.max(ln_c);
            logs.push(ln_c / ln10);
            if p >= 8 && ln_c - top < EIGENVECTOR_FLOOR_LN {
                cut = Some(p);
                break;
            }
        }
        if let Some(p_cut) = cut.or(if depth >= MAX_EIGENVECTOR_LEN { Some(depth) } else { None }) {
            let eta: Vec<f64> = (2..=p_cut).map(|q| -f[q]).collect();
            logs.truncate(p_cut);
            return Ok((p_cut, eta, logs));
        }
        depth *= 2;
    }
}

fn build_mode(
    mp: &ModeParams,
    kappa: f64,
    sigma: f64,
    residual: f64,
    bracket: [f64; 2],
) -> Result<UnstableMode> {
    let (p_cut, eta, logs) = eigenvector(mp, sigma, kappa)?;
    let mut c_tilde: Vec<f64> = logs
        .iter()
        .enumerate()
        .map(|(i, l)| UnstableMode::c_tilde_sign(i + 1) * 10f64.powf(*l))
        .collect();
    c_tilde[0] = mp.alpha(1);
    Ok(UnstableMode {
        params: *mp,
        kappa,
        sigma,
        bracket,
        residual,
        truncation_p: p_cut,
        eta,
        c_tilde,
        c_tilde_log10: logs,
    })
}

/// Non-diffusive growth rate `σ*` by bisection inside the analytic bracket.
pub fn solve_growth_rate(mp: &ModeParams) -> Result<UnstableMode> {
    let (lo, hi) = mp.bracket();
    let h_hi = characteristic(hi, mp, 0.0)?;
    let lo_below = !above_root(lo, mp, 0.0);
    if !(h_hi > 0.0 && lo_below) {
        return Err(MgError::Bracket {
            lo,
            hi,
            h_lo: characteristic(lo, mp, 0.0).unwrap_or(f64::NEG_INFINITY),
            h_hi,
        });
    }
    let (sigma, residual) = bisect(lo, hi, mp, 0.0)?;
    build_mode(mp, 0.0, sigma, residual, [lo, hi])
}

/// Right side of the diffusive lower bound
/// `aμmk2²(k1²+k2²)/(2⁵Ω²m²(k1²+k2²+4m²) + 2μ²k2⁴) − κ(k1²+k2²+4m²)`.
pub fn diffusive_lower_bound(mp: &ModeParams, kappa: f64) -> f64 {
    let (om, mu) = (mp.phys.omega, mp.phys.mu);
    let h = mp.horizontal_sq();
    let m = mp.m as f64;
    let k2sq = (mp.k2 * mp.k2) as f64;
    mp.a * mu * m * k2sq * h / (32.0 * om * om * m * m * (h + 4.0 * m * m) + 2.0 * mu * mu * k2sq * k2sq)
        - kappa * (h + 4.0 * m * m)
}

/// Diffusive growth rate only (no eigenvector); `None` when no positive root.
pub fn diffusive_growth_rate(mp: &ModeParams, kappa: f64) -> Result<Option<(f64, f64)>> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(MgError::InvalidArgument(format!("kappa = {kappa} must be positive")));
    }
    // The damping is positive at σ = 0, so h(0) is always defined.
    if above_root(0.0, mp, kappa) {
        return Ok(None);
    }
    let (_, upper) = mp.bracket();
    if !above_root(upper, mp, kappa) {
        return Err(MgError::Bracket {
            lo: 0.0,
            hi: upper,
            h_lo: characteristic(0.0, mp, kappa).unwrap_or(f64::NEG_INFINITY),
            h_hi: characteristic(upper, mp, kappa).unwrap_or(f64::NEG_INFINITY),
        });
    }
    let ratio = 10f64.powf(-DIFFUSIVE_SCAN_DECADES / (DIFFUSIVE_SCAN_POINTS - 1) as f64);
    let mut above = upper;
    let mut below = 0.0;
    let mut s = upper;
    for _ in 1..DIFFUSIVE_SCAN_POINTS {
        s *= ratio;
        if above_root(s, mp, kappa) {
            above = s;
        } else {
            below = s;
            break;
        }
    }
    let (sigma, residual) = bisect(below, above, mp, kappa)?;
    if sigma <= 0.0 {
        return Ok(None);
    }
    Ok(Some((sigma, residual)))
}

/// Diffusive growth rate `σ*(κ)` with eigenvector; `None` under strong
/// diffusion (no positive root).
pub fn solve_growth_rate_diffusive(mp: &ModeParams, kappa: f64) -> Result<Option<UnstableMode>> {
    match diffusive_growth_rate(mp, kappa)? {
        None => Ok(None),
        Some((sigma, residual)) => {
            let bracket = [diffusive_lower_bound(mp, kappa), mp.bracket().1];
            build_mode(mp, kappa, sigma, residual, bracket).map(Some)
        }
    }
}

/// Either branch: κ = 0 through the bracket, κ > 0 through the scan.
pub fn solve(mp: &ModeParams, kappa: f64) -> Result<Option<UnstableMode>> {
    if kappa == 0.0 {
        solve_growth_rate(mp).map(Some)
    } else {
        solve_growth_rate_diffusive(mp, kappa)
    }
}

/// The `P × P` generator of the truncated recurrence: rows
/// `dc_p/dt = −c_{p−1}/α_{p−1} − c_{p+1}/α_{p+1} − κ(k1²+k2²+m²p²) c_p`,
/// returned as `(sub, diag, sup)` bands (0-based, `sub[i]` couples row `i+1`
/// to column `i`).
pub fn truncated_generator(mp: &ModeParams, kappa: f64, p_max: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let alpha: Vec<f64> = (1..=p_max).map(|p| mp.alpha(p)).collect();
    let diag = (1..=p_max).map(|p| -mp.damping(p, kappa)).collect();
    let sup = (0..p_max - 1).map(|i| -1.0 / alpha[i + 1]).collect();
    let sub = (0..p_max - 1).map(|i| -1.0 / alpha[i]).collect();
    (sub, diag, sup)
}

/// Largest real eigenvalue of the truncated generator by shifted inverse
/// iteration. Independent of the continued-fraction path.
///
/// The generator is diagonally similar to a symmetric tridiagonal matrix
/// (the products of opposite off-diagonals are positive); the iteration runs
/// on that form so the Rayleigh quotient converges quadratically. The shift
/// sits just above the Gershgorin upper bound, so `shift·I − S` is strictly
/// diagonally dominant and the top eigenvalue is the dominant one of its
/// inverse.
pub fn truncated_matrix_eigenvalue(mp: &ModeParams, kappa: f64, p_max: usize) -> Result<f64> {
    if p_max < 8 {
        return Err(MgError::InvalidArgument(format!("P = {p_max} must be at least 8")));
    }
    if !(kappa.is_finite() && kappa >= 0.0) {
        return Err(MgError::InvalidArgument(format!("kappa = {kappa} must be non-negative")));
    }
    let (sub, diag, sup) = truncated_generator(mp, kappa, p_max);
    let off: Vec<f64> = sub.iter().zip(&sup).map(|(l, u)| -(l * u).sqrt()).collect();
    let n = p_max;
    let radius = |i: usize| {
        let left = if i > 0 { off[i - 1].abs() } else { 0.0 };
        let right = if i + 1 < n { off[i].abs() } else { 0.0 };
        left + right
    };
    let g_lo = (0..n).map(|i| diag[i] - radius(i)).fold(f64::INFINITY, f64::min);
    let g_hi = (0..n).map(|i| diag[i] + radius(i)).fold(f64::NEG_INFINITY, f64::max);
    let scale = (g_hi - g_lo).max(f64::MIN_POSITIVE);
    let shift = g_hi + 1e-6 * scale;

    let apply = |x: &[f64], y: &mut [f64]| {
        for i in 0..n {
            let mut v = diag[i] * x[i];
            if i > 0 {
                v += off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                v += off[i] * x[i + 1];
            }
            y[i] = v;
        }
    };
    // Thomas factorisation of shift·I − S (no pivoting needed).
    let mut piv = vec![0.0; n];
    let mut lower = vec![0.0; n];
    piv[0] = shift - diag[0];
    for i in 1..n {
        lower[i] = -off[i - 1] / piv[i - 1];
        piv[i] = shift - diag[i] + lower[i] * off[i - 1];
    }
    let solve = |x: &mut [f64]| {
        for i in 1..n {
            x[i] -= lower[i] * x[i - 1];
        }
        x[n - 1] /= piv[n - 1];
        for i in (0..n - 1).rev() {
            x[i] = (x[i] + off[i] * x[i + 1]) / piv[i];
        }
    };

    let mut x: Vec<f64> = (0..n)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 } / (i + 1) as f64)
        .collect();
    let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter_mut().for_each(|v| *v /= norm);
    let mut y = vec![0.0; n];
    let mut lambda = 0.0;
    let mut residual = f64::INFINITY;
    const BUDGET: usize = 200_000;
    for _ in 0..BUDGET {
        apply(&x, &mut y);
        lambda = x.iter().zip(&y).map(|(a, b)| a * b).sum::<f64>();
        residual = x
            .iter()
            .zip(&y)
            .map(|(a, b)| (b - lambda * a).powi(2))
            .sum::<f64>()
            .sqrt();
        if residual <= 1e-13 * scale {
            return Ok(lambda);
        }
        solve(&mut x);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
    }
    Err(MgError::Convergence {
        iterations: BUDGET,
        estimate: lambda,
        residual,
    })
}

/// `C_{a,m,μ,Ω} = aμm/(2⁸Ω²m² + 2μ²)`; `σ*(j) > j·C` on `k2² = k1 = j ≥ m`.
pub fn growth_bound_constant(a: f64, m: f64, phys: &PhysicalParams) -> f64 {
    let (om, mu) = (phys.omega, phys.mu);
    a * mu * m / (256.0 * om * om * m * m + 2.0 * mu * mu)
}

/// One point of a diffusive `(k1, k2)` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub k1: i64,
    pub k2: i64,
    /// `None` when the slice is stable.
    pub sigma: Option<f64>,
}

/// Diffusive growth rate over the box `[1, k1_max] × [1, k2_max]`, evaluated
/// in parallel; output is ordered by `(k1, k2)`.
pub fn diffusive_sweep(
    kappa: f64,
    a: f64,
    m: i64,
    phys: &PhysicalParams,
    k1_max: i64,
    k2_max: i64,
) -> Result<Vec<SweepPoint>> {
    if k1_max < 1 || k2_max < 1 {
        return Err(MgError::InvalidArgument("empty search box".into()));
    }
    let cells: Vec<(i64, i64)> = (1..=k1_max)
        .flat_map(|k1| (1..=k2_max).map(move |k2| (k1, k2)))
        .collect();
    cells
        .par_iter()
        .map(|&(k1, k2)| {
            let mp = ModeParams::new(a, m, k1, k2, *phys)?;
            let sigma = diffusive_growth_rate(&mp, kappa)?.map(|(s, _)| s);
            Ok(SweepPoint { k1, k2, sigma })
        })
        .collect()
}

/// Closed-form location of the most unstable diffusive slice for small κ.
pub fn predicted_optimum(kappa: f64, a: f64, m: f64, phys: &PhysicalParams) -> (f64, f64) {
    let k1 = a / (32.0 * phys.omega * kappa);
    let k2 = (a * m).sqrt() / (2.0 * std::f64::consts::SQRT_2 * phys.mu.sqrt()) / kappa.sqrt();
    (k1, k2)
}

/// The dynamo-scale lower bound `a²/(2¹⁰Ω²κ)`.
pub fn dynamo_bound(kappa: f64, a: f64, phys: &PhysicalParams) -> f64 {
    a * a / (1024.0 * phys.omega * phys.omega * kappa)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiffusiveOptimum {
    pub kappa: f64,
    pub k1: i64,
    pub k2: i64,
    pub mode: UnstableMode,
    pub k1_predicted: f64,
    pub k2_predicted: f64,
    pub dynamo_bound: f64,
    pub meets_dynamo_bound: bool,
}

/// Integer `(k1, k2)` maximising `σ*(κ)` inside the search box.
pub fn optimal_diffusive_mode(
    kappa: f64,
    a: f64,
    m: i64,
    phys: &PhysicalParams,
    k1_max: i64,
    k2_max: i64,
) -> Result<DiffusiveOptimum> {
    if !(kappa.is_finite() && kappa > 0.0) {
        return Err(MgError::InvalidArgument(format!("kappa = {kappa} must be positive")));
    }
    let (k1_pred, k2_pred) = predicted_optimum(kappa, a, m as f64, phys);
    if (k1_max as f64) < 4.0 * k1_pred || (k2_max as f64) < 4.0 * k2_pred {
        return Err(MgError::InvalidArgument(format!(
            "search box [1, {k1_max}] x [1, {k2_max}] does not cover the predicted optimum \
             ({k1_pred:.2}, {k2_pred:.2}) with margin factor 4"
        )));
    }
    let sweep = diffusive_sweep(kappa, a, m, phys, k1_max, k2_max)?;
    let best = sweep
        .iter()
        .filter_map(|pt| pt.sigma.map(|s| (s, pt.k1, pt.k2)))
        .fold(None::<(f64, i64, i64)>, |acc, cand| match acc {
            Some(b) if b.0 >= cand.0 => Some(b),
            _ => Some(cand),
        })
        .ok_or_else(|| MgError::Domain(format!("no unstable slice in the search box for κ = {kappa}")))?;
    let mp = ModeParams::new(a, m, best.1, best.2, *phys)?;
    let mode = solve_growth_rate_diffusive(&mp, kappa)?
        .ok_or_else(|| MgError::Domain("argmax slice lost its root on re-solve".into()))?;
    let bound = dynamo_bound(kappa, a, phys);
    Ok(DiffusiveOptimum {
        kappa,
        k1: best.1,
        k2: best.2,
        meets_dynamo_bound: mode.sigma >= bound,
        mode,
        k1_predicted: k1_pred,
        k2_predicted: k2_pred,
        dynamo_bound: bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn unit() -> ModeParams {
        ModeParams::unit(1.0, 1, 1, 1).unwrap()
    }

    #[test]
    fn alpha_hand_values() {
        assert_relative_eq!(unit().alpha(1), 13.0, epsilon = 1e-14);
        assert_relative_eq!(unit().alpha(2), 97.0, epsilon = 1e-14);
    }

    #[test]
    fn alpha_increasing_and_quartic() {
        let mp = ModeParams::unit(2.0, 3, 4, 1).unwrap();
        for p in 1..10_000 {
            assert!(mp.alpha(p + 1) > mp.alpha(p));
        }
        let limit = |p: usize| mp.alpha(p) / (p as f64).powi(4);
        assert!(((limit(10_000) - limit(1000)) / limit(10_000)).abs() <= 1e-3);
        let expected = 8.0 * 81.0 / (2.0 * 3.0 * 1.0 * 17.0);
        assert_relative_eq!(limit(10_000), expected, max_relative = 1e-4);
    }

    #[test]
    fn g_limits() {
        let mp = unit();
        let s0 = 2.0 / mp.alpha(3);
        assert_relative_eq!(g_closed_form(3, s0, &mp).unwrap(), 1.0, epsilon = 1e-12);
        assert!(matches!(g_closed_form(3, 0.5 * s0, &mp), Err(MgError::Domain(_))));
        let big = 1e6;
        let g = g_closed_form(2, big, &mp).unwrap();
        assert_relative_eq!(g, 1.0 / (big * 97.0), max_relative = 1e-10);
        let sigma = 3.0 / mp.alpha(2);
        let g2 = g_closed_form(2, sigma, &mp).unwrap();
        let g3 = g_closed_form(3, sigma, &mp).unwrap();
        let g4 = g_closed_form(4, sigma, &mp).unwrap();
        assert!(g2 > g3 && g3 > g4 && g4 > 0.0);
        assert_relative_eq!(g2, 1.0 / (sigma * mp.alpha(2) - g2), max_relative = 1e-14);
    }

    #[test]
    fn depth_validation_and_kappa_zero_shift() {
        let mp = unit();
        assert!(f_continued_fraction(5, 0.1, &mp, 8, 0.0).is_err());
        let a = f_continued_fraction(2, 0.05, &mp, 64, 0.0).unwrap();
        let b = f_adaptive(2, 0.05, &mp, 0.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-15);
    }

    #[test]
    fn pole_below_tail_spectrum() {
        let mp = unit();
        // The tail operator (p ≥ 2) has its top eigenvalue near 1/√(α₂α₃) ≈ 0.0051.
        assert!(matches!(f_adaptive(2, 0.004, &mp, 0.0), Err(MgError::Pole { .. })));
    }

    #[test]
    fn unit_root_in_bracket() {
        let mode = solve_growth_rate(&unit()).unwrap();
        assert_relative_eq!(mode.bracket_lo(), 1.0 / 1261f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(mode.bracket_hi(), 1.0 / 1092f64.sqrt(), epsilon = 1e-15);
        assert!(mode.bracket_lo() < mode.sigma && mode.sigma < mode.bracket_hi());
        assert!(mode.residual <= 1e-12 * 13.0);
        assert_relative_eq!(mode.c_tilde[0], 13.0, epsilon = 1e-12);
    }

    #[test]
    fn growth_bound_constant_values() {
        let p = PhysicalParams::default();
        assert_relative_eq!(growth_bound_constant(1.0, 1.0, &p), 1.0 / 258.0, epsilon = 1e-16);
        assert_relative_eq!(
            growth_bound_constant(2.0, 1.0, &p),
            2.0 * growth_bound_constant(1.0, 1.0, &p),
            epsilon = 1e-16
        );
        let large = growth_bound_constant(1.0, 1e4, &p) * 1e4;
        assert_relative_eq!(large, 1.0 / 256.0, max_relative = 1e-6);
    }

    #[test]
    fn strong_diffusion_has_no_root() {
        let mp = unit();
        let s0 = solve_growth_rate(&mp).unwrap().sigma;
        let kappa = s0 / (mp.horizontal_sq() + 1.0);
        assert!(solve_growth_rate_diffusive(&mp, kappa).unwrap().is_none());
        assert!(solve_growth_rate_diffusive(&mp, 0.0).is_err());
    }

    #[test]
    fn search_box_must_cover_prediction() {
        let p = PhysicalParams::default();
        assert!(matches!(
            optimal_diffusive_mode(1e-2, 4.0, 1, &p, 20, 40),
            Err(MgError::InvalidArgument(_))
        ));
    }

    #[test]
    fn matrix_requires_minimum_size() {
        assert!(truncated_matrix_eigenvalue(&unit(), 0.0, 4).is_err());
    }

    #[test]
    fn json_layout() {
        let mode = solve_growth_rate(&unit()).unwrap();
        let v = serde_json::to_value(&mode).unwrap();
        for key in ["params", "kappa", "sigma", "bracket", "residual", "P", "eta", "c_tilde", "c_tilde_log10"] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
