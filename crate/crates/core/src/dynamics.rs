//! Deterministic, truncated and Itô-corrected tendencies.
//!
//! The drift is split into the untruncated part
//! `(−fẑ×u − ∇p + νΔv, ηΔh)` and the two advective nonlinearities
//! `(−u·∇v, −∇·(hu))`; truncation multiplies only the latter by
//! `f_R(‖v‖_{1,2} + ‖h‖_{1,2})`. Viscosity is dissipative (`+νΔv` on the
//! right-hand side).

use crate::error::{invalid, Result, SrswError};
use crate::noise::NoiseBasis;
use crate::physics::{coriolis, pressure, velocity, PhysicalParams, State};
use crate::spectral::{ScalarField, VectorField};

/// Time-derivative contributions `(dv, dh)` per unit time.
pub type Tendency = State;

/// Quintic smoothstep `6t⁵ − 15t⁴ + 10t³` on `[0, 1]`.
fn smoothstep(t: f64) -> f64 {
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// `f_R(x)`: 1 on `[0, R]`, 0 on `[R+1, ∞)`, a monotone C² quintic between.
pub fn truncation_value(x: f64, r: f64) -> Result<f64> {
    if !(x >= 0.0) {
        return Err(invalid(
            "x",
            format!("truncation argument must be >= 0, got {x}"),
        ));
    }
    if !(r > 0.0) {
        return Err(invalid("R", format!("must be positive, got {r}")));
    }
    Ok(truncation_factor(x, Some(r)))
}

/// `f_R(x)` with `R = ∞` meaning no truncation.
pub fn truncation_factor(x: f64, r: Option<f64>) -> f64 {
    match r {
        None => 1.0,
        Some(r) if x <= r => 1.0,
        Some(r) if x >= r + 1.0 => 0.0,
        Some(r) => 1.0 - smoothstep(x - r),
    }
}

fn ensure_finite(term: &str, f: &ScalarField) -> Result<()> {
    if f.is_finite() {
        Ok(())
    } else {
        Err(SrswError::NonFinite {
            term: term.to_string(),
        })
    }
}

fn ensure_finite_vec(term: &str, f: &VectorField) -> Result<()> {
    ensure_finite(term, &f.x)?;
    ensure_finite(term, &f.y)
}

/// The untruncated drift `(−fẑ×u − ∇p + νΔv, ηΔh)`.
pub fn linear_drift(state: &State, params: &PhysicalParams) -> Result<Tendency> {
    linear_drift_opts(state, params, true)
}

/// Untruncated drift, optionally without the viscous terms (for schemes
/// that integrate viscosity exactly).
pub(crate) fn linear_drift_opts(
    state: &State,
    params: &PhysicalParams,
    viscous: bool,
) -> Result<Tendency> {
    let u = velocity(state, params)?;
    let cor = coriolis(&u, params.coriolis_f);
    ensure_finite_vec("coriolis f z x u", &cor)?;
    let grad_p = pressure(state, params)?.gradient();
    ensure_finite_vec("pressure gradient", &grad_p)?;
    let grid = state.grid();
    let (mut dv, dh) = if viscous {
        let visc_v = state.v.laplacian();
        ensure_finite_vec("momentum viscosity", &visc_v)?;
        let visc_h = state.h.laplacian();
        ensure_finite("height viscosity", &visc_h)?;
        (visc_v.scaled(params.nu), visc_h.scaled(params.eta))
    } else {
        (VectorField::zeros(grid), ScalarField::zeros(grid))
    };
    dv.axpy(-1.0, &cor);
    dv.axpy(-1.0, &grad_p);
    Ok(State { v: dv, h: dh })
}

/// The advective nonlinearities `(−u·∇v, −∇·(hu))`, dealiased.
pub fn nonlinear_drift(state: &State, params: &PhysicalParams) -> Result<Tendency> {
    let u = velocity(state, params)?;
    let gx = state.v.x.gradient();
    let gy = state.v.y.gradient();
    let adv = |g: &VectorField| {
        u.x.zip_unchecked(&g.x, |a, b| a * b)
            .zip_unchecked(&u.y.zip_unchecked(&g.y, |a, b| a * b), |a, b| a + b)
            .dealiased()
    };
    let adv_v = VectorField {
        x: adv(&gx),
        y: adv(&gy),
    };
    ensure_finite_vec("advection u.grad v", &adv_v)?;
    let flux = VectorField {
        x: state.h.product_unchecked(&u.x),
        y: state.h.product_unchecked(&u.y),
    };
    let div_flux = flux.divergence();
    ensure_finite("flux divergence div(h u)", &div_flux)?;
    Ok(State {
        v: adv_v.scaled(-1.0),
        h: div_flux.scaled(-1.0),
    })
}

fn combine(linear: Tendency, nonlinear: Option<(f64, Tendency)>) -> Tendency {
    let mut out = linear;
    if let Some((factor, nl)) = nonlinear {
        out.axpy(factor, &nl);
    }
    out
}

/// Drift with the nonlinear terms multiplied by `factor`; a zero factor
/// skips them entirely.
pub(crate) fn drift_with_factor(
    state: &State,
    params: &PhysicalParams,
    factor: f64,
) -> Result<Tendency> {
    drift_with_factor_opts(state, params, factor, true)
}

pub(crate) fn drift_with_factor_opts(
    state: &State,
    params: &PhysicalParams,
    factor: f64,
    viscous: bool,
) -> Result<Tendency> {
    let linear = linear_drift_opts(state, params, viscous)?;
    let nonlinear = if factor == 0.0 {
        None
    } else {
        Some((factor, nonlinear_drift(state, params)?))
    };
    Ok(combine(linear, nonlinear))
}

/// `dv = −u·∇v − fẑ×u − ∇p + νΔv`, `dh = −∇·(hu) + ηΔh`.
pub fn drift_deterministic(state: &State, params: &PhysicalParams) -> Result<Tendency> {
    drift_with_factor(state, params, 1.0)
}

/// Drift with the advective terms multiplied by `f_R(‖a‖_{1,2})`.
pub fn drift_truncated(state: &State, params: &PhysicalParams, r: f64) -> Result<Tendency> {
    if !(r > 0.0) {
        return Err(invalid("R", format!("must be positive, got {r}")));
    }
    drift(state, params, Some(r))
}

/// Truncated drift for finite `r`, full drift for `None`.
pub fn drift(state: &State, params: &PhysicalParams, r: Option<f64>) -> Result<Tendency> {
    let factor = truncation_factor(state.norm12(), r);
    drift_with_factor(state, params, factor)
}

/// Itô drift: `drift + ½ Σᵢ 𝒢ᵢ²(a)`.
pub fn ito_rhs(
    state: &State,
    params: &PhysicalParams,
    basis: &NoiseBasis,
    r: Option<f64>,
) -> Result<Tendency> {
    let mut out = drift(state, params, r)?;
    if !basis.is_empty() {
        out.axpy(1.0, &basis.ito_correction(state)?);
    }
    Ok(out)
}

/// Empirical constants of the truncated-term `L²` bounds
/// `f_R² ‖ℒ_u v‖² ≤ C(R)(‖v‖²_{2,2} + 1)` and
/// `f_R² ‖∇·(hu)‖² ≤ C(R)(‖v‖²_{2,2} + ‖h‖²_{2,2} + 1)`.
#[derive(Debug, Clone, serde::Serialize)]
pub struct NonlinearBoundReport {
    pub r: f64,
    pub samples: usize,
    /// `sup lhs/(‖v‖²_{2,2} + 1)` for the advective term.
    pub advective_ratio: f64,
    /// `sup lhs/(‖v‖²_{2,2} + ‖h‖²_{2,2} + 1)` for the flux divergence.
    pub flux_ratio: f64,
    pub advective_lhs: Vec<f64>,
    pub flux_lhs: Vec<f64>,
}

pub fn nonlinear_l2_bound_check(
    states: &[State],
    params: &PhysicalParams,
    r: f64,
) -> Result<NonlinearBoundReport> {
    if !(r > 0.0) {
        return Err(invalid("R", format!("must be positive, got {r}")));
    }
    let mut adv_lhs = Vec::with_capacity(states.len());
    let mut flux_lhs = Vec::with_capacity(states.len());
    let (mut adv_ratio, mut flux_ratio) = (0.0f64, 0.0f64);
    for s in states {
        let fr = truncation_factor(s.norm12(), Some(r));
        let (la, lf) = if fr == 0.0 {
            (0.0, 0.0)
        } else {
            let nl = nonlinear_drift(s, params)?;
            let a = crate::spectral::sobolev_norm(&[&nl.v.x, &nl.v.y], 0)?;
            let f = crate::spectral::sobolev_norm(&[&nl.h], 0)?;
            (fr * fr * a * a, fr * fr * f * f)
        };
        let v22 = crate::spectral::sobolev_norm(&[&s.v.x, &s.v.y], 2)?.powi(2);
        let h22 = crate::spectral::sobolev_norm(&[&s.h], 2)?.powi(2);
        adv_ratio = adv_ratio.max(la / (v22 + 1.0));
        flux_ratio = flux_ratio.max(lf / (v22 + h22 + 1.0));
        adv_lhs.push(la);
        flux_lhs.push(lf);
    }
    Ok(NonlinearBoundReport {
        r,
        samples: states.len(),
        advective_ratio: adv_ratio,
        flux_ratio,
        advective_lhs: adv_lhs,
        flux_lhs,
    })
}
