//! Cubic 3-D complex FFT on an `n³` grid stored row-major (last index
//! fastest), parallelised over pencils.
//!
//! Normalisation: [`Transform3::to_grid`] evaluates `Σ_k f̂(k) e^{ik·x}`
//! (unnormalised inverse DFT) and [`Transform3::to_spectral`] divides the
//! forward DFT by `n³`, so the pair are mutual inverses and
//! `f̂(k) = mean_x f(x) e^{−ik·x}`.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

pub struct Transform3 {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform3 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Transform3").field("n", &self.n).finish()
    }
}

impl Transform3 {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Grid slot of wavenumber `k` (each component reduced mod `n`).
    pub fn slot(&self, k: [i64; 3]) -> usize {
        let n = self.n as i64;
        let w = |v: i64| v.rem_euclid(n) as usize;
        (w(k[0]) * self.n + w(k[1])) * self.n + w(k[2])
    }

    pub fn to_grid(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
    }

    pub fn to_spectral(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
        let s = 1.0 / (self.n as f64).powi(3);
        data.par_iter_mut().for_each(|v| *v *= s);
    }

    fn apply(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        assert_eq!(data.len(), n * n * n);
        // Axis 2: contiguous rows.
        data.par_chunks_mut(n).for_each(|row| fft.process(row));
        // Axis 1: within each slab, gather columns.
        data.par_chunks_mut(n * n).for_each(|slab| {
            let mut col = vec![Complex64::new(0.0, 0.0); n];
            for i2 in 0..n {
                for i1 in 0..n {
                    col[i1] = slab[i1 * n + i2];
                }
                fft.process(&mut col);
                for i1 in 0..n {
                    slab[i1 * n + i2] = col[i1];
                }
            }
        });
        // Axis 0: gather pencils into a scratch buffer, then scatter back.
        let src: &[Complex64] = data;
        let mut pencils = vec![Complex64::new(0.0, 0.0); n * n * n];
        pencils.par_chunks_mut(n).enumerate().for_each(|(j, pencil)| {
            for i0 in 0..n {
                pencil[i0] = src[i0 * n * n + j];
            }
            fft.process(pencil);
        });
        data.par_chunks_mut(n * n).enumerate().for_each(|(i0, slab)| {
            for (j, v) in slab.iter_mut().enumerate() {
                *v = pencils[j * n + i0];
            }
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_mode_round_trip() {
        let n = 10;
        let t = Transform3::new(n);
        let mut data = vec![Complex64::new(0.0, 0.0); n * n * n];
        let k = [2i64, -3, 1];
        data[t.slot(k)] = Complex64::new(0.5, -0.25);
        let orig = data.clone();
        t.to_grid(&mut data);
        let x = [3usize, 7, 1];
        let phase = 2.0 * std::f64::consts::PI / n as f64
            * (k[0] as f64 * x[0] as f64 + k[1] as f64 * x[1] as f64 + k[2] as f64 * x[2] as f64);
        let expected = Complex64::new(0.5, -0.25) * Complex64::from_polar(1.0, phase);
        assert!((data[(x[0] * n + x[1]) * n + x[2]] - expected).norm() < 1e-14);
        t.to_spectral(&mut data);
        for (a, b) in data.iter().zip(&orig) {
            assert!((a - b).norm() < 1e-15);
        }
    }
}
