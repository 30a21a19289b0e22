//! Thin wrapper around rustfft for per-ring angular transforms.

use std::sync::Arc;

use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub struct ThetaFft {
    n: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

impl ThetaFft {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        ThetaFft { n, fwd, inv }
    }

    /// Signed wavenumber of mode index `q` on an `n`-point circle.
    /// The Nyquist mode (q = n/2) is assigned +n/2; its derivative
    /// multiplier is zeroed separately.
    pub fn signed_mode(&self, q: usize) -> i64 {
        let n = self.n as i64;
        let q = q as i64;
        if q <= n / 2 {
            q
        } else {
            q - n
        }
    }

    pub fn forward_ring(&self, ring: &[f64], out: &mut Vec<Complex64>) {
        out.clear();
        out.extend(ring.iter().map(|&v| Complex64::new(v, 0.0)));
        self.fwd.process(out);
    }

    /// Inverse transform, already normalized by 1/n; returns the real part.
    pub fn inverse_ring(&self, modes: &mut [Complex64], out: &mut [f64]) {
        self.inv.process(modes);
        let scale = 1.0 / self.n as f64;
        for (o, m) in out.iter_mut().zip(modes.iter()) {
            *o = m.re * scale;
        }
    }

    /// Forward transform of every radial ring; rows stay rows.
    pub fn forward_rings(&self, values: &Array2<f64>) -> Array2<Complex64> {
        let (n_r, n_t) = values.dim();
        assert_eq!(n_t, self.n);
        let mut out = Array2::from_elem((n_r, n_t), Complex64::new(0.0, 0.0));
        let mut buf = Vec::with_capacity(n_t);
        for (k, row) in values.outer_iter().enumerate() {
            let ring: Vec<f64> = row.to_vec();
            self.forward_ring(&ring, &mut buf);
            for (q, v) in buf.iter().enumerate() {
                out[(k, q)] = *v;
            }
        }
        out
    }

    pub fn inverse_rings(&self, modes: &Array2<Complex64>) -> Array2<f64> {
        let (n_r, n_t) = modes.dim();
        assert_eq!(n_t, self.n);
        let mut out = Array2::zeros((n_r, n_t));
        let mut buf = vec![Complex64::new(0.0, 0.0); n_t];
        let mut ring = vec![0.0; n_t];
        for k in 0..n_r {
            for q in 0..n_t {
                buf[q] = modes[(k, q)];
            }
            self.inverse_ring(&mut buf, &mut ring);
            for q in 0..n_t {
                out[(k, q)] = ring[q];
            }
        }
        out
    }

    /// Spectral d/dtheta applied ring by ring.
    pub fn theta_derivative(&self, values: &Array2<f64>) -> Array2<f64> {
        let (n_r, n_t) = values.dim();
        assert_eq!(n_t, self.n);
        let mut out = Array2::zeros((n_r, n_t));
        let mut buf = Vec::with_capacity(n_t);
        let mut ring = vec![0.0; n_t];
        for k in 0..n_r {
            let row: Vec<f64> = values.row(k).to_vec();
            self.forward_ring(&row, &mut buf);
            for q in 0..n_t {
                let m = self.signed_mode(q);
                // Nyquist derivative is not representable; drop it.
                let mult = if 2 * (q as i64) == n_t as i64 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, m as f64)
                };
                buf[q] *= mult;
            }
            self.inverse_ring(&mut buf, &mut ring);
            for q in 0..n_t {
                out[(k, q)] = ring[q];
            }
        }
        out
    }
}
