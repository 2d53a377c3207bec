//! Truncated Fourier representation of real mean-zero scalars on `T^d`.
//!
//! Coefficients are stored for every `k` with `|k|∞ ≤ N` in lexicographic
//! order (first component slowest, each running `-N..=N`). The transform
//! convention is `f(x) = Σ_k f̂(k) e^{ik·x}`, so Parseval reads
//! `mean_x |f|² = Σ_k |f̂(k)|²`; every norm in this crate uses that
//! normalisation (no `(2π)^d` factors).

use std::io::{Read, Write};
use std::path::Path;

use num_complex::Complex64;

use crate::error::{MgError, Result};
use crate::symbols::Wavevector;

const MAGIC: &[u8; 4] = b"MGSF";
pub const LAYOUT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    dim: usize,
    n: usize,
    coeffs: Vec<Complex64>,
}

impl SpectralField {
    pub fn zeros(dim: usize, n: usize) -> Self {
        assert!((1..=3).contains(&dim), "dimension must be 1, 2 or 3");
        let side = 2 * n + 1;
        Self {
            dim,
            n,
            coeffs: vec![Complex64::new(0.0, 0.0); side.pow(dim as u32)],
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.dim, self.n)
    }

    /// Builds a field from a coefficient function evaluated at every stored `k`.
    pub fn from_fn<F>(dim: usize, n: usize, f: F) -> Self
    where
        F: Fn(&[i64]) -> Complex64,
    {
        let mut out = Self::zeros(dim, n);
        for idx in 0..out.coeffs.len() {
            let k = out.index_to_k(idx);
            out.coeffs[idx] = f(&k[..dim]);
        }
        out
    }

    pub fn from_coeffs(dim: usize, n: usize, coeffs: Vec<Complex64>) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(MgError::InvalidArgument(format!("dimension {dim} unsupported")));
        }
        let expected = (2 * n + 1).pow(dim as u32);
        if coeffs.len() != expected {
            return Err(MgError::InvalidArgument(format!(
                "expected {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self { dim, n, coeffs })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Truncation radius `N`.
    pub fn radius(&self) -> usize {
        self.n
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Integer coordinates of storage slot `idx`, padded with zeros to length 3.
    pub fn index_to_k(&self, mut idx: usize) -> [i64; 3] {
        let side = 2 * self.n + 1;
        let mut k = [0i64; 3];
        for d in (0..self.dim).rev() {
            k[d] = (idx % side) as i64 - self.n as i64;
            idx /= side;
        }
        k
    }

    pub fn wavevector_at(&self, idx: usize) -> Wavevector {
        Wavevector::from(self.index_to_k(idx))
    }

    pub fn k_to_index(&self, k: &[i64]) -> Option<usize> {
        let n = self.n as i64;
        let side = 2 * self.n + 1;
        let mut idx = 0usize;
        for d in 0..self.dim {
            let kd = k.get(d).copied().unwrap_or(0);
            if kd.abs() > n {
                return None;
            }
            idx = idx * side + (kd + n) as usize;
        }
        if k.iter().skip(self.dim).any(|&v| v != 0) {
            return None;
        }
        Some(idx)
    }

    pub fn get(&self, k: &[i64]) -> Complex64 {
        self.k_to_index(k)
            .map(|i| self.coeffs[i])
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn set(&mut self, k: &[i64], value: Complex64) -> Result<()> {
        let idx = self
            .k_to_index(k)
            .ok_or_else(|| MgError::InvalidArgument(format!("k = {k:?} outside truncation")))?;
        self.coeffs[idx] = value;
        Ok(())
    }

    /// Sets `f̂(k) = v` and `f̂(-k) = conj(v)`, keeping the field real.
    pub fn set_hermitian(&mut self, k: &[i64], value: Complex64) -> Result<()> {
        if k.iter().all(|&v| v == 0) {
            return Err(MgError::InvalidArgument("the k = 0 mode is fixed to zero mean".into()));
        }
        let neg: Vec<i64> = k.iter().map(|v| -v).collect();
        self.set(k, value)?;
        self.set(&neg, value.conj())
    }

    /// `|k|` of storage slot `idx`.
    pub fn k_norm_at(&self, idx: usize) -> f64 {
        let k = self.index_to_k(idx);
        k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt()
    }

    /// `(Σ |f̂|²)^{1/2}`, the L² norm under the mean-normalised convention.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `(Σ |k|² |f̂|²)^{1/2}`.
    pub fn gradient_l2_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = self.index_to_k(i);
                (k.iter().map(|&v| v * v).sum::<i64>()) as f64 * c.norm_sqr()
            })
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn mean(&self) -> Complex64 {
        self.get(&[0, 0, 0][..self.dim])
    }

    /// Largest `|f̂(k)|` on the plane `k3 = 0` (3-D only; the vertical mean).
    pub fn vertical_mean_max(&self) -> f64 {
        if self.dim < 3 {
            return 0.0;
        }
        self.coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| self.index_to_k(*i)[2] == 0)
            .map(|(_, c)| c.norm())
            .fold(0.0, f64::max)
    }

    /// `max_k |f̂(-k) - conj(f̂(k))|`; zero for real fields.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.index_to_k(i);
            let neg: Vec<i64> = k[..self.dim].iter().map(|v| -v).collect();
            worst = worst.max((self.get(&neg) - c.conj()).norm());
        }
        worst
    }

    pub fn inner(&self, other: &SpectralField) -> Complex64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&mut self, s: f64) {
        for c in &mut self.coeffs {
            *c *= s;
        }
    }

    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.coeffs.len(), other.coeffs.len());
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn sub(&self, other: &SpectralField) -> SpectralField {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Copy onto a different truncation radius (padding or truncating).
    pub fn resized(&self, n: usize) -> SpectralField {
        let mut out = SpectralField::zeros(self.dim, n);
        for (i, c) in self.coeffs.iter().enumerate() {
            let k = self.index_to_k(i);
            if let Some(j) = out.k_to_index(&k[..self.dim]) {
                out.coeffs[j] = *c;
            }
        }
        out
    }

    /// Binary layout: `b"MGSF"`, then little-endian `u32` layout version, dim
    /// and `N`, then `(re, im)` pairs of `f64` in lexicographic `k` order.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&LAYOUT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.n as u32).to_le_bytes())?;
        for c in &self.coeffs {
            w.write_all(&c.re.to_le_bytes())?;
            w.write_all(&c.im.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(MgError::Format("bad magic bytes".into()));
        }
        let mut word = [0u8; 4];
        let mut read_u32 = |r: &mut R| -> Result<u32> {
            r.read_exact(&mut word)?;
            Ok(u32::from_le_bytes(word))
        };
        let version = read_u32(&mut r)?;
        if version != LAYOUT_VERSION {
            return Err(MgError::Format(format!("unsupported layout version {version}")));
        }
        let dim = read_u32(&mut r)? as usize;
        let n = read_u32(&mut r)? as usize;
        if !(1..=3).contains(&dim) {
            return Err(MgError::Format(format!("bad dimension {dim}")));
        }
        let len = (2 * n + 1).pow(dim as u32);
        let mut coeffs = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            let re = f64::from_le_bytes(buf);
            r.read_exact(&mut buf)?;
            let im = f64::from_le_bytes(buf);
            coeffs.push(Complex64::new(re, im));
        }
        Self::from_coeffs(dim, n, coeffs)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_binary(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_binary(std::io::BufReader::new(f))
    }

    /// Debug dump with columns `k1,k2,k3,re,im` (nonzero coefficients only).
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "k1,k2,k3,re,im")?;
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.norm() == 0.0 {
                continue;
            }
            let k = self.index_to_k(i);
            writeln!(w, "{},{},{},{:e},{:e}", k[0], k[1], k[2], c.re, c.im)?;
        }
        Ok(())
    }
}
