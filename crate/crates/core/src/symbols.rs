//! Fourier multiplier symbols of the magneto-geostrophic velocity operator.
//!
//! The velocity is `U_j = M_j Θ` with the explicit even symbols `M̂_j(k)`,
//! the zero-order matrix `T_ij = -∂_i (-Δ)^{-1} M_j` recovers the velocity
//! as `U_j = ∂_i T_ij Θ`, and the perturbation magnetic field is
//! `b_j = (β/η) (-Δ)^{-1} ∂_2 M_j Θ`. All three vanish identically on the
//! plane `k3 = 0` (zero vertical mean).

use std::ops::RangeInclusive;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{MgError, Result};
use crate::field::SpectralField;

/// Physical constants of the model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub omega: f64,
    pub eta: f64,
    pub beta: f64,
    /// `β²/η`, fixed at construction.
    pub mu: f64,
    pub kappa: f64,
}

impl PhysicalParams {
    pub fn new(omega: f64, eta: f64, beta: f64, kappa: f64) -> Result<Self> {
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if !positive(omega) || !positive(eta) || !positive(beta) {
            return Err(MgError::InvalidArgument(format!(
                "Omega, eta, beta must be positive (got {omega}, {eta}, {beta})"
            )));
        }
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(MgError::InvalidArgument(format!(
                "kappa must be non-negative (got {kappa})"
            )));
        }
        Ok(Self {
            omega,
            eta,
            beta,
            mu: beta * beta / eta,
            kappa,
        })
    }

    /// Parameters specified through `μ` directly; uses `β = η = μ`.
    pub fn from_mu(omega: f64, mu: f64, kappa: f64) -> Result<Self> {
        Self::new(omega, mu, mu, kappa)
    }

    pub fn with_kappa(mut self, kappa: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 0.0) {
            return Err(MgError::InvalidArgument(format!(
                "kappa must be non-negative (got {kappa})"
            )));
        }
        self.kappa = kappa;
        Ok(self)
    }
}

impl Default for PhysicalParams {
    fn default() -> Self {
        Self {
            omega: 1.0,
            eta: 1.0,
            beta: 1.0,
            mu: 1.0,
            kappa: 0.0,
        }
    }
}

/// Integer Fourier wavevector on the 3-torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Wavevector {
    pub k1: i64,
    pub k2: i64,
    pub k3: i64,
}

impl Wavevector {
    pub const fn new(k1: i64, k2: i64, k3: i64) -> Self {
        Self { k1, k2, k3 }
    }

    pub fn norm_sq(&self) -> f64 {
        let (a, b, c) = (self.k1 as f64, self.k2 as f64, self.k3 as f64);
        a * a + b * b + c * c
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn as_array(&self) -> [i64; 3] {
        [self.k1, self.k2, self.k3]
    }

    pub fn is_zero(&self) -> bool {
        self.k1 == 0 && self.k2 == 0 && self.k3 == 0
    }
}

impl std::ops::Neg for Wavevector {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.k1, -self.k2, -self.k3)
    }
}

impl From<[i64; 3]> for Wavevector {
    fn from(k: [i64; 3]) -> Self {
        Self::new(k[0], k[1], k[2])
    }
}

/// `(M̂₁, M̂₂, M̂₃)(k)`; zero on `k3 = 0`.
pub fn m_symbol(k: Wavevector, p: &PhysicalParams) -> [f64; 3] {
    if k.k3 == 0 {
        return [0.0; 3];
    }
    let (k1, k2, k3) = (k.k1 as f64, k.k2 as f64, k.k3 as f64);
    let ksq = k.norm_sq();
    let (om, mu) = (p.omega, p.mu);
    let k2sq = k2 * k2;
    let denom = 4.0 * om * om * k3 * k3 * ksq + mu * mu * k2sq * k2sq;
    [
        (2.0 * om * k2 * k3 * ksq - mu * k1 * k2sq * k3) / denom,
        (-2.0 * om * k1 * k3 * ksq - mu * k2sq * k2 * k3) / denom,
        mu * k2sq * (k1 * k1 + k2sq) / denom,
    ]
}

/// Vertical component `M̂₃(k)` alone; this is the only component entering the
/// linearisation about a state depending on `x3` only.
pub fn m3_symbol(k1: i64, k2: i64, k3: i64, p: &PhysicalParams) -> f64 {
    if k3 == 0 {
        return 0.0;
    }
    let (k1, k2, k3) = (k1 as f64, k2 as f64, k3 as f64);
    let h = k1 * k1 + k2 * k2;
    let k2sq = k2 * k2;
    p.mu * k2sq * h
        / (4.0 * p.omega * p.omega * k3 * k3 * (h + k3 * k3) + p.mu * p.mu * k2sq * k2sq)
}

/// `T̂_ij(k) = -(i k_i)/|k|² · M̂_j(k)`, indexed `[i][j]`.
pub fn t_symbol(k: Wavevector, p: &PhysicalParams) -> [[Complex64; 3]; 3] {
    let mut out = [[Complex64::new(0.0, 0.0); 3]; 3];
    if k.k3 == 0 {
        return out;
    }
    let m = m_symbol(k, p);
    let ksq = k.norm_sq();
    let kk = k.as_array();
    for i in 0..3 {
        let factor = -(kk[i] as f64) / ksq;
        for j in 0..3 {
            out[i][j] = Complex64::new(0.0, factor * m[j]);
        }
    }
    out
}

/// `b̂_j(k) = (β/η) (i k2)/|k|² · M̂_j(k)` per unit `Θ̂(k)`.
pub fn b_symbol(k: Wavevector, p: &PhysicalParams) -> [Complex64; 3] {
    if k.k3 == 0 || k.k2 == 0 {
        return [Complex64::new(0.0, 0.0); 3];
    }
    let m = m_symbol(k, p);
    let factor = (p.beta / p.eta) * k.k2 as f64 / k.norm_sq();
    m.map(|mj| Complex64::new(0.0, factor * mj))
}

/// `k · M̂(k)`; identically zero.
pub fn divergence_residual(k: Wavevector, p: &PhysicalParams) -> f64 {
    let m = m_symbol(k, p);
    k.k1 as f64 * m[0] + k.k2 as f64 * m[1] + k.k3 as f64 * m[2]
}

/// `Σ_ij k_i k_j T̂_ij(k)`; identically zero.
pub fn t_contraction_residual(k: Wavevector, p: &PhysicalParams) -> Complex64 {
    let t = t_symbol(k, p);
    let kk = k.as_array().map(|v| v as f64);
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..3 {
        for j in 0..3 {
            acc += kk[i] * kk[j] * t[i][j];
        }
    }
    acc
}

/// `Σ_i (i k_i) T̂_ij(k)` for each `j`; reproduces `M̂_j(k)`.
pub fn t_reconstruction(k: Wavevector, p: &PhysicalParams) -> [Complex64; 3] {
    let t = t_symbol(k, p);
    let kk = k.as_array().map(|v| v as f64);
    let mut out = [Complex64::new(0.0, 0.0); 3];
    for (j, o) in out.iter_mut().enumerate() {
        for i in 0..3 {
            *o += Complex64::new(0.0, kk[i]) * t[i][j];
        }
    }
    out
}

pub fn m_norm(k: Wavevector, p: &PhysicalParams) -> f64 {
    let m = m_symbol(k, p);
    (m[0] * m[0] + m[1] * m[1] + m[2] * m[2]).sqrt()
}

/// Coefficientwise product `symbol(k) · f̂(k)`.
pub fn apply_multiplier<F>(field: &SpectralField, symbol: F) -> Result<SpectralField>
where
    F: Fn(Wavevector) -> Complex64,
{
    let mut out = field.zeros_like();
    for (idx, c) in field.coeffs().iter().enumerate() {
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        let k = field.wavevector_at(idx);
        let s = symbol(k);
        if !(s.re.is_finite() && s.im.is_finite()) {
            return Err(MgError::NonFiniteSymbol { k: k.as_array() });
        }
        out.coeffs_mut()[idx] = s * c;
    }
    Ok(out)
}

/// Vector-valued variant of [`apply_multiplier`].
pub fn apply_vector_multiplier<F>(field: &SpectralField, symbol: F) -> Result<[SpectralField; 3]>
where
    F: Fn(Wavevector) -> [Complex64; 3],
{
    let mut out = [field.zeros_like(), field.zeros_like(), field.zeros_like()];
    for (idx, c) in field.coeffs().iter().enumerate() {
        if c.re == 0.0 && c.im == 0.0 {
            continue;
        }
        let k = field.wavevector_at(idx);
        let s = symbol(k);
        for (j, sj) in s.iter().enumerate() {
            if !(sj.re.is_finite() && sj.im.is_finite()) {
                return Err(MgError::NonFiniteSymbol { k: k.as_array() });
            }
            out[j].coeffs_mut()[idx] = sj * c;
        }
    }
    Ok(out)
}

/// Velocity `Û = M̂ Θ̂`.
pub fn velocity(theta: &SpectralField, p: &PhysicalParams) -> Result<[SpectralField; 3]> {
    apply_vector_multiplier(theta, |k| m_symbol(k, p).map(|m| Complex64::new(m, 0.0)))
}

/// Perturbation magnetic field reconstructed from the buoyancy.
pub fn magnetic_field(theta: &SpectralField, p: &PhysicalParams) -> Result<[SpectralField; 3]> {
    apply_vector_multiplier(theta, |k| b_symbol(k, p))
}

/// One row of the symbol growth table along `k = (k1, round(k1^r), 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticRow {
    pub k1: i64,
    pub k2: i64,
    pub m_abs: [f64; 3],
    /// `|M̂₁|/k1^r`, `|M̂₂|/k1`, `|M̂₃|/k1^{2r}`.
    pub ratios: [f64; 3],
}

/// Growth of the symbols on the curved region `k2 ≈ k1^r`, `k3 = 1`.
///
/// Rows are produced at `k1 = lo, 2·lo, 4·lo, …` and at the upper endpoint.
pub fn symbol_asymptotics_report(
    r: f64,
    k1_range: RangeInclusive<i64>,
    p: &PhysicalParams,
) -> Result<Vec<AsymptoticRow>> {
    let (lo, hi) = (*k1_range.start(), *k1_range.end());
    if lo > hi {
        return Err(MgError::InvalidArgument("empty k1 range".into()));
    }
    if lo < 2 || hi > 1 << 20 {
        return Err(MgError::InvalidArgument(format!(
            "k1 range [{lo}, {hi}] must lie in [2, 2^20]"
        )));
    }
    if !(r > 0.0 && r <= 0.5) {
        return Err(MgError::InvalidArgument(format!("r = {r} must lie in (0, 1/2]")));
    }
    let mut ks = Vec::new();
    let mut k1 = lo;
    while k1 < hi {
        ks.push(k1);
        k1 *= 2;
    }
    ks.push(hi);
    Ok(ks
        .into_iter()
        .map(|k1| {
            let x = k1 as f64;
            let k2 = x.powf(r).round() as i64;
            let m = m_symbol(Wavevector::new(k1, k2, 1), p);
            let m_abs = m.map(f64::abs);
            AsymptoticRow {
                k1,
                k2,
                m_abs,
                ratios: [
                    m_abs[0] / x.powf(r),
                    m_abs[1] / x,
                    m_abs[2] / x.powf(2.0 * r),
                ],
            }
        })
        .collect())
}

/// Empirical constant `C = max |M̂(k)|/|k|` over `0 < |k|∞ ≤ kmax`, `k3 ≠ 0`.
pub fn measured_bound_constant(p: &PhysicalParams, kmax: i64) -> f64 {
    let mut c: f64 = 0.0;
    for k1 in -kmax..=kmax {
        for k2 in -kmax..=kmax {
            for k3 in 1..=kmax {
                let k = Wavevector::new(k1, k2, k3);
                c = c.max(m_norm(k, p) / k.norm());
            }
        }
    }
    c
}

/// Exact rational evaluation for integer `Ω` and `μ`.
pub mod exact {
    use num_rational::Ratio;

    use super::Wavevector;

    pub type Rational = Ratio<i128>;

    pub fn m_symbol(k: Wavevector, omega: i64, mu: i64) -> [Rational; 3] {
        let zero = Rational::from_integer(0);
        if k.k3 == 0 {
            return [zero; 3];
        }
        let (k1, k2, k3) = (k.k1 as i128, k.k2 as i128, k.k3 as i128);
        let (om, mu) = (omega as i128, mu as i128);
        let ksq = k1 * k1 + k2 * k2 + k3 * k3;
        let k2sq = k2 * k2;
        let denom = 4 * om * om * k3 * k3 * ksq + mu * mu * k2sq * k2sq;
        [
            Rational::new(2 * om * k2 * k3 * ksq - mu * k1 * k2sq * k3, denom),
            Rational::new(-2 * om * k1 * k3 * ksq - mu * k2sq * k2 * k3, denom),
            Rational::new(mu * k2sq * (k1 * k1 + k2sq), denom),
        ]
    }

    /// Imaginary parts of `T̂_ij`; the matrix is purely imaginary.
    pub fn t_symbol_imag(k: Wavevector, omega: i64, mu: i64) -> [[Rational; 3]; 3] {
        let m = m_symbol(k, omega, mu);
        let kk = k.as_array().map(|v| v as i128);
        let ksq: i128 = kk.iter().map(|v| v * v).sum();
        let mut out = [[Rational::from_integer(0); 3]; 3];
        if k.k3 == 0 {
            return out;
        }
        for i in 0..3 {
            for j in 0..3 {
                out[i][j] = -Rational::new(kk[i], ksq) * m[j];
            }
        }
        out
    }

    pub fn divergence(k: Wavevector, omega: i64, mu: i64) -> Rational {
        let m = m_symbol(k, omega, mu);
        let kk = k.as_array().map(|v| Rational::from_integer(v as i128));
        kk[0] * m[0] + kk[1] * m[1] + kk[2] * m[2]
    }

    pub fn t_contraction(k: Wavevector, omega: i64, mu: i64) -> Rational {
        let t = t_symbol_imag(k, omega, mu);
        let kk = k.as_array().map(|v| Rational::from_integer(v as i128));
        let mut acc = Rational::from_integer(0);
        for i in 0..3 {
            for j in 0..3 {
                acc += kk[i] * kk[j] * t[i][j];
            }
        }
        acc
    }
}
