//! Initial data: analytic trigonometric sums, seeded band-limited random
//! states and snapshot loading.
//!
//! Random states are drawn as Fourier coefficients over a fixed list of
//! wavevectors, so the same seed gives the same continuum field on every
//! grid that resolves the band.

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::io;
use crate::noise::Phase;
use crate::physics::State;
use crate::spectral::{ScalarField, Spectrum, TorusGrid, VectorField};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    V1,
    V2,
    H,
}

/// `amplitude · trig(κ(k1 x + k2 y))` added to one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub component: Component,
    pub k1: i32,
    pub k2: i32,
    #[serde(default = "default_phase")]
    pub phase: Phase,
    pub amplitude: f64,
}

fn default_phase() -> Phase {
    Phase::Sin
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomSpec {
    pub seed: u64,
    /// Largest `|k|_∞` drawn.
    #[serde(default = "default_kmax")]
    pub kmax: i32,
    /// Coefficient standard deviation decays like `(1 + |k|²)^{-decay/2}`.
    #[serde(default = "default_decay")]
    pub decay: f64,
    /// Relative weight of `h` against `v`.
    #[serde(default = "one")]
    pub h_weight: f64,
}

fn default_kmax() -> i32 {
    4
}
fn default_decay() -> f64 {
    3.0
}
fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IcSpec {
    Rest {
        #[serde(default)]
        h_mean: f64,
    },
    Analytic {
        terms: Vec<Term>,
        #[serde(default)]
        h_mean: f64,
        /// Rescale so that `‖v‖_{1,2} + ‖h‖_{1,2}` equals this value.
        #[serde(default)]
        norm12: Option<f64>,
    },
    Random {
        #[serde(flatten)]
        spec: RandomSpec,
        #[serde(default)]
        norm12: Option<f64>,
    },
    Snapshot {
        path: PathBuf,
    },
}

impl Default for IcSpec {
    fn default() -> Self {
        IcSpec::Rest { h_mean: 0.0 }
    }
}

impl IcSpec {
    pub fn build(&self, grid: &Arc<TorusGrid>) -> Result<State> {
        match self {
            IcSpec::Rest { h_mean } => {
                let mut s = State::zeros(grid);
                s.h = ScalarField::constant(grid, *h_mean);
                Ok(s)
            }
            IcSpec::Analytic {
                terms,
                h_mean,
                norm12,
            } => {
                let mut s = analytic_state(grid, terms)?;
                if let Some(target) = norm12 {
                    s = rescale_to(&s, *target)?;
                }
                s.h = &s.h + &ScalarField::constant(grid, *h_mean);
                Ok(s)
            }
            IcSpec::Random { spec, norm12 } => {
                let s = random_state(grid, spec)?;
                match norm12 {
                    Some(target) => rescale_to(&s, *target),
                    None => Ok(s),
                }
            }
            IcSpec::Snapshot { path } => {
                let (meta, fields) = io::read_snapshot(path)?;
                if meta.n != grid.n() || (meta.length - grid.length()).abs() > 1e-12 {
                    return Err(invalid(
                        "ic.path",
                        format!("snapshot grid {}x{} differs from run grid", meta.n, meta.n),
                    ));
                }
                if fields.len() != 3 {
                    return Err(invalid("ic.path", "snapshot must hold v1, v2, h"));
                }
                let mut it = fields.into_iter();
                let (v1, v2, h) = (it.next().unwrap(), it.next().unwrap(), it.next().unwrap());
                let v1 = ScalarField::from_values(grid, v1.into_values())?;
                let v2 = ScalarField::from_values(grid, v2.into_values())?;
                let h = ScalarField::from_values(grid, h.into_values())?;
                State::new(VectorField::new(v1, v2)?, h)
            }
        }
    }
}

/// Sum of trigonometric terms, assembled as Fourier coefficients.
pub fn analytic_state(grid: &Arc<TorusGrid>, terms: &[Term]) -> Result<State> {
    let n = grid.n();
    let limit = (n / 3) as i32;
    let full = (n * n) as f64;
    let mut specs = [
        Spectrum::zeros(grid),
        Spectrum::zeros(grid),
        Spectrum::zeros(grid),
    ];
    for t in terms {
        if !t.amplitude.is_finite() {
            return Err(invalid("ic.terms.amplitude", "must be finite"));
        }
        if t.k1.abs().max(t.k2.abs()) > limit {
            return Err(invalid(
                "ic.terms",
                format!("mode ({}, {}) outside the resolved band", t.k1, t.k2),
            ));
        }
        let spec = match t.component {
            Component::V1 => &mut specs[0],
            Component::V2 => &mut specs[1],
            Component::H => &mut specs[2],
        };
        // fold onto k1 > 0 or (k1 = 0, k2 >= 0); sin is odd
        let flip = t.k1 < 0 || (t.k1 == 0 && t.k2 < 0);
        let (k1, k2) = if flip { (-t.k1, -t.k2) } else { (t.k1, t.k2) };
        let amp = if flip && t.phase == Phase::Sin {
            -t.amplitude
        } else {
            t.amplitude
        };
        let coeff = if k1 == 0 && k2 == 0 {
            match t.phase {
                Phase::Cos => Complex64::new(amp * full, 0.0),
                Phase::Sin => Complex64::new(0.0, 0.0),
            }
        } else {
            match t.phase {
                Phase::Cos => Complex64::new(0.5 * amp * full, 0.0),
                Phase::Sin => Complex64::new(0.0, -0.5 * amp * full),
            }
        };
        let idx = |kx: i32, ky: i32| kx as usize * n + ky.rem_euclid(n as i32) as usize;
        let c = spec.coefficients_mut();
        c[idx(k1, k2)] += coeff;
        if k1 == 0 && k2 != 0 {
            c[idx(0, -k2)] += coeff.conj();
        }
    }
    let [a, b, c] = specs;
    State::new(VectorField::new(a.to_field(), b.to_field())?, c.to_field())
}

/// Wavevectors of the half-plane with `|k|_∞ ≤ kmax`, excluding zero.
fn half_plane(kmax: i32) -> Vec<(i32, i32)> {
    let mut out = Vec::new();
    for k1 in 0..=kmax {
        for k2 in -kmax..=kmax {
            if k1 == 0 && k2 <= 0 {
                continue;
            }
            out.push((k1, k2));
        }
    }
    out
}

/// Mean-free band-limited random state; identical continuum field on every
/// grid with `n ≥ 3·kmax`.
pub fn random_state(grid: &Arc<TorusGrid>, spec: &RandomSpec) -> Result<State> {
    if spec.kmax < 1 {
        return Err(invalid("ic.kmax", "must be at least 1"));
    }
    if 3 * spec.kmax as usize > grid.n() {
        return Err(invalid(
            "ic.kmax",
            format!("{} not resolved on n={}", spec.kmax, grid.n()),
        ));
    }
    if !(spec.decay.is_finite() && spec.h_weight.is_finite()) {
        return Err(invalid("ic", "decay and h_weight must be finite"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut terms = Vec::new();
    for (k1, k2) in half_plane(spec.kmax) {
        let sd = (1.0 + (k1 * k1 + k2 * k2) as f64).powf(-spec.decay / 2.0);
        for (component, w) in [
            (Component::V1, 1.0),
            (Component::V2, 1.0),
            (Component::H, spec.h_weight),
        ] {
            for phase in [Phase::Cos, Phase::Sin] {
                let z: f64 = rng.sample(StandardNormal);
                terms.push(Term {
                    component,
                    k1,
                    k2,
                    phase,
                    amplitude: w * sd * z,
                });
            }
        }
    }
    analytic_state(grid, &terms)
}

/// Scales a state so that `‖v‖_{1,2} + ‖h‖_{1,2} = target`.
pub fn rescale_to(state: &State, target: f64) -> Result<State> {
    if !(target.is_finite() && target >= 0.0) {
        return Err(invalid("ic.norm12", "must be finite and non-negative"));
    }
    let n = state.norm12();
    if n == 0.0 {
        if target == 0.0 {
            return Ok(state.clone());
        }
        return Err(invalid("ic.norm12", "cannot rescale a zero state"));
    }
    Ok(state.scaled(target / n))
}
