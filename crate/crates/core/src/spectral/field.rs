use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use num_complex::Complex64;

use super::grid::{Axis, TorusGrid};
use crate::error::{Result, SrswError};

/// Real scalar field sampled on the `n × n` lattice, row-major with the
/// row index running along `y`: value at `(x_i, y_j)` is `data[j * n + i]`.
#[derive(Clone)]
pub struct ScalarField {
    grid: Arc<TorusGrid>,
    data: Vec<f64>,
}

impl std::fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScalarField")
            .field("n", &self.grid.n())
            .field("max_abs", &self.max_abs())
            .finish()
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.grid.same_as(&other.grid) && self.data == other.data
    }
}

impl ScalarField {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<TorusGrid>, c: f64) -> Self {
        let n = grid.n();
        Self {
            grid: grid.clone(),
            data: vec![c; n * n],
        }
    }

    /// Samples `f(x, y)` at every lattice point.
    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut data = Vec::with_capacity(n * n);
        for j in 0..n {
            for i in 0..n {
                let (x, y) = grid.point(i, j);
                data.push(f(x, y));
            }
        }
        Self {
            grid: grid.clone(),
            data,
        }
    }

    pub fn from_values(grid: &Arc<TorusGrid>, data: Vec<f64>) -> Result<Self> {
        let n = grid.n();
        if data.len() != n * n {
            return Err(SrswError::GridMismatch(format!(
                "expected {} values, got {}",
                n * n,
                data.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            data,
        })
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<f64> {
        self.data
    }

    pub fn check_grid(&self, other: &ScalarField) -> Result<()> {
        self.grid.check_same(&other.grid)
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// `∫ f` over the torus.
    pub fn integral(&self) -> f64 {
        self.data.iter().sum::<f64>() * self.grid.cell_area()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn spectrum(&self) -> Spectrum {
        Spectrum {
            grid: self.grid.clone(),
            data: self.grid.forward(&self.data),
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two fields on one grid.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(self.zip_unchecked(other, f))
    }

    pub(crate) fn zip_unchecked(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += c * other`.
    pub fn axpy(&mut self, c: f64, other: &ScalarField) {
        debug_assert!(self.grid.same_as(&other.grid));
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += c * b;
        }
    }

    pub fn scale(&mut self, c: f64) {
        self.data.iter_mut().for_each(|v| *v *= c);
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    /// Dealiased pointwise product: the product is projected onto the
    /// two-thirds band.
    pub fn product(&self, other: &ScalarField) -> Result<Self> {
        self.check_grid(other)?;
        Ok(self.product_unchecked(other))
    }

    pub(crate) fn product_unchecked(&self, other: &ScalarField) -> Self {
        self.zip_unchecked(other, |a, b| a * b).dealiased()
    }

    /// Zeroes every mode with `max(|k₁|,|k₂|) > n/3`.
    pub fn dealiased(&self) -> Self {
        let mut s = self.spectrum();
        s.apply_dealias();
        s.to_field()
    }

    /// Spectral derivative of the given order along `axis`.
    pub fn derivative(&self, axis: Axis, order: u32) -> Result<Self> {
        if order < 1 {
            return Err(SrswError::InvalidOrder(order));
        }
        Ok(self.spectrum().derivative(axis, order).to_field())
    }

    pub fn laplacian(&self) -> Self {
        self.spectrum().laplacian().to_field()
    }

    pub fn gradient(&self) -> VectorField {
        let s = self.spectrum();
        VectorField {
            x: s.derivative(Axis::X, 1).to_field(),
            y: s.derivative(Axis::Y, 1).to_field(),
        }
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        assert!(
            self.grid.same_as(&rhs.grid),
            "grid mismatch in field addition"
        );
        self.zip_unchecked(rhs, |a, b| a + b)
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        assert!(
            self.grid.same_as(&rhs.grid),
            "grid mismatch in field subtraction"
        );
        self.zip_unchecked(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &ScalarField {
    type Output = ScalarField;
    fn mul(self, rhs: f64) -> ScalarField {
        self.scaled(rhs)
    }
}

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scaled(-1.0)
    }
}

/// Pair of scalar fields on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub x: ScalarField,
    pub y: ScalarField,
}

impl VectorField {
    pub fn new(x: ScalarField, y: ScalarField) -> Result<Self> {
        x.check_grid(&y)?;
        Ok(Self { x, y })
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self {
            x: ScalarField::zeros(grid),
            y: ScalarField::zeros(grid),
        }
    }

    pub fn from_fn(grid: &Arc<TorusGrid>, f: impl Fn(f64, f64) -> (f64, f64)) -> Self {
        Self {
            x: ScalarField::from_fn(grid, |x, y| f(x, y).0),
            y: ScalarField::from_fn(grid, |x, y| f(x, y).1),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.x.grid()
    }

    pub fn components(&self) -> [&ScalarField; 2] {
        [&self.x, &self.y]
    }

    pub fn component(&self, axis: Axis) -> &ScalarField {
        match axis {
            Axis::X => &self.x,
            Axis::Y => &self.y,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn max_abs(&self) -> f64 {
        self.x.max_abs().max(self.y.max_abs())
    }

    /// Largest pointwise Euclidean magnitude.
    pub fn max_magnitude(&self) -> f64 {
        self.x
            .values()
            .iter()
            .zip(self.y.values())
            .fold(0.0f64, |m, (a, b)| m.max(a.hypot(*b)))
    }

    pub fn axpy(&mut self, c: f64, other: &VectorField) {
        self.x.axpy(c, &other.x);
        self.y.axpy(c, &other.y);
    }

    pub fn scale(&mut self, c: f64) {
        self.x.scale(c);
        self.y.scale(c);
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            x: self.x.scaled(c),
            y: self.y.scaled(c),
        }
    }

    pub fn dealiased(&self) -> Self {
        Self {
            x: self.x.dealiased(),
            y: self.y.dealiased(),
        }
    }

    /// Spectral divergence `∂ₓ Fˣ + ∂ᵧ Fʸ`.
    pub fn divergence(&self) -> ScalarField {
        let mut s = self.x.spectrum().derivative(Axis::X, 1);
        s.add_assign(&self.y.spectrum().derivative(Axis::Y, 1));
        s.to_field()
    }

    pub fn laplacian(&self) -> Self {
        Self {
            x: self.x.laplacian(),
            y: self.y.laplacian(),
        }
    }
}

impl Add for &VectorField {
    type Output = VectorField;
    fn add(self, rhs: &VectorField) -> VectorField {
        VectorField {
            x: &self.x + &rhs.x,
            y: &self.y + &rhs.y,
        }
    }
}

impl Sub for &VectorField {
    type Output = VectorField;
    fn sub(self, rhs: &VectorField) -> VectorField {
        VectorField {
            x: &self.x - &rhs.x,
            y: &self.y - &rhs.y,
        }
    }
}

/// Half-spectrum coefficients of a real field (see [`TorusGrid`] for layout).
#[derive(Clone, Debug)]
pub struct Spectrum {
    grid: Arc<TorusGrid>,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.spectral_len()],
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn coefficients(&self) -> &[Complex64] {
        &self.data
    }

    pub fn coefficients_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn to_field(&self) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            data: self.grid.inverse(&self.data),
        }
    }

    pub fn add_assign(&mut self, other: &Spectrum) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    /// Multiplies every coefficient by `m(k₁, k₂)` (integer wavenumbers).
    pub fn multiply_by(&self, m: impl Fn(i64, i64) -> Complex64) -> Self {
        let g = &self.grid;
        let data = self
            .data
            .iter()
            .enumerate()
            .map(|(idx, c)| {
                let (k1, k2) = g.wavenumber_at(idx);
                c * m(k1, k2)
            })
            .collect();
        Self {
            grid: g.clone(),
            data,
        }
    }

    /// Multiplies by `(iκ)^order`; odd orders drop the Nyquist line of the
    /// differentiated axis so the result stays real.
    pub fn derivative(&self, axis: Axis, order: u32) -> Self {
        let g = &self.grid;
        let nyq = (g.n() / 2) as i64;
        let scale = g.wavenumber_scale();
        let odd = order % 2 == 1;
        // (i)^order
        let phase = match order % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        };
        self.multiply_by(|k1, k2| {
            let k = match axis {
                Axis::X => k1,
                Axis::Y => k2,
            };
            if odd && k.abs() == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                phase * (k as f64 * scale).powi(order as i32)
            }
        })
    }

    pub fn laplacian(&self) -> Self {
        let s2 = self.grid.wavenumber_scale().powi(2);
        self.multiply_by(|k1, k2| Complex64::new(-((k1 * k1 + k2 * k2) as f64) * s2, 0.0))
    }

    pub fn apply_dealias(&mut self) {
        for (c, keep) in self.data.iter_mut().zip(self.grid.dealias_mask()) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// `Σ w(k) |f̂_k|²` over the full spectrum, with `w` a function of the
    /// angular wavenumber squared.
    pub fn weighted_energy(&self, weight: impl Fn(f64) -> f64) -> f64 {
        let g = &self.grid;
        let n = g.n();
        let s2 = g.wavenumber_scale().powi(2);
        let mut total = 0.0;
        for (idx, c) in self.data.iter().enumerate() {
            let ix = idx / n;
            let (k1, k2) = g.wavenumber_at(idx);
            let kk = (k1 * k1 + k2 * k2) as f64 * s2;
            total += g.parseval_weight(ix) * weight(kk) * c.norm_sqr();
        }
        let nn = (n * n) as f64;
        total * g.cell_area() / nn
    }
}
