//! Prognostic state `a = (v, h)`, physical parameters and the diagnostic
//! relations between them.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::spectral::{self, ScalarField, TorusGrid, VectorField};

/// Momentum-like variable `v` and column thickness `h` on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct State {
    pub v: VectorField,
    pub h: ScalarField,
}

impl State {
    pub fn new(v: VectorField, h: ScalarField) -> Result<Self> {
        v.x.check_grid(&h)?;
        v.y.check_grid(&h)?;
        Ok(Self { v, h })
    }

    pub fn zeros(grid: &Arc<TorusGrid>) -> Self {
        Self {
            v: VectorField::zeros(grid),
            h: ScalarField::zeros(grid),
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.h.grid()
    }

    /// Components in the fixed order `v¹, v², h`.
    pub fn components(&self) -> [&ScalarField; 3] {
        [&self.v.x, &self.v.y, &self.h]
    }

    pub fn is_finite(&self) -> bool {
        self.v.is_finite() && self.h.is_finite()
    }

    pub fn axpy(&mut self, c: f64, other: &State) {
        self.v.axpy(c, &other.v);
        self.h.axpy(c, &other.h);
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            v: self.v.scaled(c),
            h: self.h.scaled(c),
        }
    }

    pub fn difference(&self, other: &State) -> Self {
        Self {
            v: &self.v - &other.v,
            h: &self.h - &other.h,
        }
    }

    pub fn dealiased(&self) -> Self {
        Self {
            v: self.v.dealiased(),
            h: self.h.dealiased(),
        }
    }

    /// `‖v‖_{1,2} + ‖h‖_{1,2}`: the quantity fed to the truncation and
    /// the `τ^R` monitor.
    pub fn norm12(&self) -> f64 {
        let v = spectral::sobolev_norm(&[&self.v.x, &self.v.y], 1).expect("state grid");
        let h = spectral::sobolev_norm(&[&self.h], 1).expect("state grid");
        v + h
    }

    /// `‖v‖²_{1,2} + ‖h‖²_{1,2}`.
    pub fn energy12(&self) -> f64 {
        self.sobolev_sq(1)
    }

    /// `‖a‖_{2,2}` with components in quadrature.
    pub fn norm22(&self) -> f64 {
        self.sobolev_sq(2).sqrt()
    }

    pub fn sobolev_sq(&self, k: u32) -> f64 {
        self.components()
            .iter()
            .map(|f| spectral::sobolev_norm_sq(f, k).expect("k in 0..=2"))
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.sobolev_sq(0).sqrt()
    }

    /// `⟨a, b⟩_{1,2}` summed over components.
    pub fn h1_inner(&self, other: &State) -> f64 {
        self.components()
            .iter()
            .zip(other.components())
            .map(|(a, b)| spectral::h1_inner(a, b).expect("state grid"))
            .sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.v.max_abs().max(self.h.max_abs())
    }
}

/// Scalar parameters of the model, serializable for configs and sidecars.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamValues {
    pub epsilon: f64,
    #[serde(rename = "f")]
    pub coriolis_f: f64,
    pub froude: f64,
    pub nu: f64,
    pub eta: f64,
}

impl Default for ParamValues {
    fn default() -> Self {
        Self {
            epsilon: 1.0,
            coriolis_f: 1.0,
            froude: 1.0,
            nu: 0.1,
            eta: 0.1,
        }
    }
}

impl ParamValues {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("epsilon", self.epsilon),
            ("froude", self.froude),
            ("nu", self.nu),
            ("eta", self.eta),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(invalid(name, format!("must be positive, got {value}")));
            }
        }
        if !self.coriolis_f.is_finite() {
            return Err(invalid("f", "must be finite"));
        }
        Ok(())
    }
}

/// Rossby number, Coriolis parameter, Froude number, viscosities,
/// topography `b` and rotation potential `ℛ`.
#[derive(Clone, Debug)]
pub struct PhysicalParams {
    pub epsilon: f64,
    pub coriolis_f: f64,
    pub froude: f64,
    pub nu: f64,
    pub eta: f64,
    pub topography: ScalarField,
    pub rotation: VectorField,
}

impl PhysicalParams {
    /// Flat bottom and `ℛ = 0`.
    pub fn new(grid: &Arc<TorusGrid>, values: ParamValues) -> Result<Self> {
        values.validate()?;
        Ok(Self {
            epsilon: values.epsilon,
            coriolis_f: values.coriolis_f,
            froude: values.froude,
            nu: values.nu,
            eta: values.eta,
            topography: ScalarField::zeros(grid),
            rotation: VectorField::zeros(grid),
        })
    }

    pub fn with_topography(mut self, b: ScalarField) -> Result<Self> {
        self.topography.check_grid(&b)?;
        self.topography = b;
        Ok(self)
    }

    pub fn with_rotation(mut self, r: VectorField) -> Result<Self> {
        self.topography.check_grid(&r.x)?;
        self.rotation = r;
        Ok(self)
    }

    pub fn values(&self) -> ParamValues {
        ParamValues {
            epsilon: self.epsilon,
            coriolis_f: self.coriolis_f,
            froude: self.froude,
            nu: self.nu,
            eta: self.eta,
        }
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        self.topography.grid()
    }
}

/// `u = (v − ℛ)/ε`.
pub fn velocity(state: &State, params: &PhysicalParams) -> Result<VectorField> {
    state.h.check_grid(&params.topography)?;
    let inv = 1.0 / params.epsilon;
    Ok(VectorField {
        x: state
            .v
            .x
            .zip_unchecked(&params.rotation.x, |v, r| (v - r) * inv),
        y: state
            .v
            .y
            .zip_unchecked(&params.rotation.y, |v, r| (v - r) * inv),
    })
}

/// `p = (h − b)/(ε𝓕)`.
pub fn pressure(state: &State, params: &PhysicalParams) -> Result<ScalarField> {
    state.h.check_grid(&params.topography)?;
    let inv = 1.0 / (params.epsilon * params.froude);
    Ok(state
        .h
        .zip_unchecked(&params.topography, |h, b| (h - b) * inv))
}

/// `f ẑ × u = (−f u², f u¹)`.
pub fn coriolis(u: &VectorField, f: f64) -> VectorField {
    VectorField {
        x: u.y.scaled(-f),
        y: u.x.scaled(f),
    }
}

/// `∫ h` over the torus.
pub fn mass(state: &State) -> f64 {
    state.h.integral()
}
