//! Uniform periodic grid on the square torus and its transform plans.
//!
//! Transform convention: the forward transform is unnormalized, so the
//! `(0,0)` coefficient equals `n² · mean(field)`; the inverse divides by
//! `n²`. Only the half spectrum `k₁ ∈ [0, n/2]` is stored (the field is
//! real). Spectral storage is column-major in `k₁`: coefficient
//! `(k₁, k₂)` lives at `ix * n + iy` with `ix = k₁` and `iy = k₂ mod n`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use crate::error::{Result, SrswError};

/// Spatial direction on the torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
}

pub struct TorusGrid {
    n: usize,
    length: f64,
    r2c: Arc<dyn RealToComplex<f64>>,
    c2r: Arc<dyn ComplexToReal<f64>>,
    col_forward: Arc<dyn Fft<f64>>,
    col_inverse: Arc<dyn Fft<f64>>,
    dealias_mask: Vec<bool>,
}

impl fmt::Debug for TorusGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TorusGrid")
            .field("n", &self.n)
            .field("length", &self.length)
            .finish()
    }
}

impl TorusGrid {
    /// Builds an `n × n` grid of period `length` per axis.
    pub fn new(n: usize, length: f64) -> Result<Arc<Self>> {
        if n < 8 || !n.is_multiple_of(2) {
            return Err(SrswError::InvalidGrid(format!(
                "points per axis must be even and >= 8, got {n}"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SrswError::InvalidGrid(format!(
                "period must be positive and finite, got {length}"
            )));
        }
        let mut real_planner = RealFftPlanner::<f64>::new();
        let mut planner = FftPlanner::<f64>::new();
        let half = n / 2 + 1;
        let mut dealias_mask = vec![false; half * n];
        for ix in 0..half {
            for iy in 0..n {
                let k1 = ix as i64;
                let k2 = signed_index(iy, n);
                let kmax = k1.abs().max(k2.abs());
                dealias_mask[ix * n + iy] = 3 * kmax <= n as i64;
            }
        }
        Ok(Arc::new(Self {
            n,
            length,
            r2c: real_planner.plan_fft_forward(n),
            c2r: real_planner.plan_fft_inverse(n),
            col_forward: planner.plan_fft_forward(n),
            col_inverse: planner.plan_fft_inverse(n),
            dealias_mask,
        }))
    }

    /// Default desk-scale grid: 64 × 64 on `[0, 2π)²`.
    pub fn default_grid() -> Arc<Self> {
        Self::new(64, 2.0 * PI).expect("default grid is valid")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn spacing(&self) -> f64 {
        self.length / self.n as f64
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.spacing() * self.spacing()
    }

    /// Number of stored half-spectrum coefficients.
    pub fn spectral_len(&self) -> usize {
        (self.n / 2 + 1) * self.n
    }

    pub fn half_width(&self) -> usize {
        self.n / 2 + 1
    }

    /// Scale turning integer wavenumbers into angular ones, `2π / length`.
    pub fn wavenumber_scale(&self) -> f64 {
        2.0 * PI / self.length
    }

    /// Integer wavenumber pair of the spectral slot `(ix, iy)`.
    pub fn wavenumber(&self, ix: usize, iy: usize) -> (i64, i64) {
        (ix as i64, signed_index(iy, self.n))
    }

    /// Integer wavenumber pair of a flat spectral index.
    pub fn wavenumber_at(&self, idx: usize) -> (i64, i64) {
        self.wavenumber(idx / self.n, idx % self.n)
    }

    /// Multiplicity of a half-spectrum column in Parseval sums.
    pub fn parseval_weight(&self, ix: usize) -> f64 {
        if ix == 0 || ix == self.n / 2 {
            1.0
        } else {
            2.0
        }
    }

    pub fn dealias_mask(&self) -> &[bool] {
        &self.dealias_mask
    }

    /// True when both grids discretize the same torus at the same resolution.
    pub fn same_as(&self, other: &TorusGrid) -> bool {
        self.n == other.n && self.length == other.length
    }

    pub fn check_same(&self, other: &TorusGrid) -> Result<()> {
        if self.same_as(other) {
            Ok(())
        } else {
            Err(SrswError::GridMismatch(format!(
                "n={} L={} vs n={} L={}",
                self.n, self.length, other.n, other.length
            )))
        }
    }

    /// Coordinates of lattice point `(i, j)`.
    pub fn point(&self, i: usize, j: usize) -> (f64, f64) {
        let h = self.spacing();
        (i as f64 * h, j as f64 * h)
    }

    /// Unnormalized forward transform of row-major real data.
    pub(crate) fn forward(&self, values: &[f64]) -> Vec<Complex64> {
        let n = self.n;
        let half = self.half_width();
        debug_assert_eq!(values.len(), n * n);
        let mut spec = vec![Complex64::new(0.0, 0.0); half * n];
        let mut row_in = self.r2c.make_input_vec();
        let mut row_out = self.r2c.make_output_vec();
        let mut scratch = self.r2c.make_scratch_vec();
        for j in 0..n {
            row_in.copy_from_slice(&values[j * n..(j + 1) * n]);
            self.r2c
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("row transform lengths are fixed by the plan");
            for (ix, c) in row_out.iter().enumerate() {
                spec[ix * n + j] = *c;
            }
        }
        self.col_forward.process(&mut spec);
        spec
    }

    /// Inverse transform (normalized by `1/n²`) back to row-major real data.
    pub(crate) fn inverse(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let n = self.n;
        let half = self.half_width();
        debug_assert_eq!(spectrum.len(), half * n);
        let mut cols = spectrum.to_vec();
        self.col_inverse.process(&mut cols);
        let norm = 1.0 / (n * n) as f64;
        let mut out = vec![0.0; n * n];
        let mut row_in = self.c2r.make_input_vec();
        let mut row_out = self.c2r.make_output_vec();
        let mut scratch = self.c2r.make_scratch_vec();
        for j in 0..n {
            for ix in 0..half {
                row_in[ix] = cols[ix * n + j];
            }
            // the DC and Nyquist entries of a real row are real; drop roundoff
            row_in[0].im = 0.0;
            row_in[half - 1].im = 0.0;
            self.c2r
                .process_with_scratch(&mut row_in, &mut row_out, &mut scratch)
                .expect("row transform lengths are fixed by the plan");
            for (dst, src) in out[j * n..(j + 1) * n].iter_mut().zip(row_out.iter()) {
                *dst = src * norm;
            }
        }
        out
    }
}

fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}
