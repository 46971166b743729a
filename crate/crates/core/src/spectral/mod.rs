//! Torus discretization, spectral calculus, inner products and Sobolev norms.

mod field;
mod grid;

pub use field::{ScalarField, Spectrum, VectorField};
pub use grid::{Axis, TorusGrid};

use crate::error::{Result, SrswError};

/// Spectral derivative `∂^order f / ∂axis^order`.
pub fn derivative(field: &ScalarField, axis: Axis, order: u32) -> Result<ScalarField> {
    field.derivative(axis, order)
}

pub fn laplacian(field: &ScalarField) -> ScalarField {
    field.laplacian()
}

/// `∫ f g` over the torus by the uniform (trapezoidal) rule.
pub fn inner_product(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.check_grid(g)?;
    Ok(inner_unchecked(f, g))
}

pub(crate) fn inner_unchecked(f: &ScalarField, g: &ScalarField) -> f64 {
    let s: f64 = f.values().iter().zip(g.values()).map(|(a, b)| a * b).sum();
    s * f.grid().cell_area()
}

/// Squared `W^{k,2}` norm of one field with weight `(1 + |κ|²)^k`.
pub fn sobolev_norm_sq(field: &ScalarField, k: u32) -> Result<f64> {
    if k > 2 {
        return Err(SrswError::UnsupportedSobolevIndex(k));
    }
    Ok(field
        .spectrum()
        .weighted_energy(|kk| (1.0 + kk).powi(k as i32)))
}

/// `W^{k,2}` norm of a list of component fields, combined in quadrature.
pub fn sobolev_norm(fields: &[&ScalarField], k: u32) -> Result<f64> {
    if k > 2 {
        return Err(SrswError::UnsupportedSobolevIndex(k));
    }
    if let Some((first, rest)) = fields.split_first() {
        for f in rest {
            first.check_grid(f)?;
        }
    }
    let mut total = 0.0;
    for f in fields {
        total += sobolev_norm_sq(f, k)?;
    }
    Ok(total.sqrt())
}

/// `⟨f, g⟩_{1,2} = ⟨f, g⟩ + ⟨∇f, ∇g⟩`, computed spectrally.
pub fn h1_inner(f: &ScalarField, g: &ScalarField) -> Result<f64> {
    f.check_grid(g)?;
    let grid = f.grid();
    let n = grid.n();
    let s2 = grid.wavenumber_scale().powi(2);
    let (fs, gs) = (f.spectrum(), g.spectrum());
    let mut total = 0.0;
    for (idx, (a, b)) in fs.coefficients().iter().zip(gs.coefficients()).enumerate() {
        let (k1, k2) = grid.wavenumber_at(idx);
        let w = 1.0 + (k1 * k1 + k2 * k2) as f64 * s2;
        total += grid.parseval_weight(idx / n) * w * (a * b.conj()).re;
    }
    Ok(total * grid.cell_area() / (n * n) as f64)
}

/// Projection onto the two-thirds band.
pub fn dealias(field: &ScalarField) -> ScalarField {
    field.dealiased()
}
