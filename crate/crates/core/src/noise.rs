//! Divergence-free transport-noise basis `{ξᵢ}`, the operators `ℒᵢ`, `𝒜ᵢ`,
//! `𝒢ᵢ`, the Itô correction `½ Σ 𝒢ᵢ²`, and Brownian increment sampling.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result, SrswError};
use crate::physics::State;
use crate::spectral::{Axis, ScalarField, TorusGrid, VectorField};

pub const DEFAULT_MODES: usize = 8;
pub const DEFAULT_AMPLITUDE: f64 = 0.05;
pub const DEFAULT_DECAY: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Cos,
    Sin,
}

/// One basis element `a (k⊥/|k|) trig(κ k·x)`, `κ = 2π/L`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseMode {
    pub k1: i64,
    pub k2: i64,
    pub phase: Phase,
    pub amplitude: f64,
}

impl NoiseMode {
    pub fn field(&self, grid: &Arc<TorusGrid>) -> VectorField {
        let kn = ((self.k1 * self.k1 + self.k2 * self.k2) as f64).sqrt();
        let (px, py) = (-(self.k2 as f64) / kn, self.k1 as f64 / kn);
        let scale = grid.wavenumber_scale();
        let (k1, k2, a, phase) = (self.k1 as f64, self.k2 as f64, self.amplitude, self.phase);
        VectorField::from_fn(grid, move |x, y| {
            let arg = scale * (k1 * x + k2 * y);
            let t = match phase {
                Phase::Cos => arg.cos(),
                Phase::Sin => arg.sin(),
            };
            (a * px * t, a * py * t)
        })
    }
}

/// Basis description as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BasisSpec {
    Modes {
        modes: Vec<NoiseMode>,
    },
    Shorthand {
        #[serde(rename = "K")]
        count: usize,
        #[serde(rename = "A")]
        amplitude: f64,
        #[serde(rename = "s", default = "default_decay")]
        decay: f64,
    },
}

fn default_decay() -> f64 {
    DEFAULT_DECAY
}

impl Default for BasisSpec {
    fn default() -> Self {
        BasisSpec::Shorthand {
            count: DEFAULT_MODES,
            amplitude: DEFAULT_AMPLITUDE,
            decay: DEFAULT_DECAY,
        }
    }
}

impl BasisSpec {
    pub fn build(&self, grid: &Arc<TorusGrid>) -> Result<NoiseBasis> {
        match self {
            BasisSpec::Shorthand {
                count,
                amplitude,
                decay,
            } => NoiseBasis::default_basis(grid, *count, *amplitude, *decay),
            BasisSpec::Modes { modes } => NoiseBasis::from_modes(grid, modes.clone()),
        }
    }

    pub fn len(&self) -> usize {
        match self {
            BasisSpec::Shorthand { count, .. } => *count,
            BasisSpec::Modes { modes } => modes.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Finite family of divergence-free fields with precomputed gradients.
#[derive(Clone, Debug)]
pub struct NoiseBasis {
    grid: Arc<TorusGrid>,
    modes: Vec<NoiseMode>,
    xi: Vec<VectorField>,
    // grad_xi[i][c] = ∇ξᵢᶜ
    grad_xi: Vec<[VectorField; 2]>,
}

impl NoiseBasis {
    pub fn empty(grid: &Arc<TorusGrid>) -> Self {
        Self {
            grid: grid.clone(),
            modes: Vec::new(),
            xi: Vec::new(),
            grad_xi: Vec::new(),
        }
    }

    /// The `count` lowest resolved modes, `a_k = A |k|^{-s}`, cos then sin.
    pub fn default_basis(
        grid: &Arc<TorusGrid>,
        count: usize,
        amplitude: f64,
        decay: f64,
    ) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude > 0.0) {
            return Err(invalid("A", format!("must be positive, got {amplitude}")));
        }
        if !decay.is_finite() {
            return Err(invalid("s", "must be finite"));
        }
        let band = (grid.n() / 3) as i64;
        let mut ks = Vec::new();
        for k1 in 0..=band {
            for k2 in -band..=band {
                if k1 > 0 || k2 > 0 {
                    ks.push((k1, k2));
                }
            }
        }
        if count > 2 * ks.len() {
            return Err(invalid(
                "K",
                format!(
                    "{count} modes exceed the {} resolved modes of an n={} grid",
                    2 * ks.len(),
                    grid.n()
                ),
            ));
        }
        ks.sort_by_key(|&(k1, k2)| (k1 * k1 + k2 * k2, k1, k2));
        let modes = ks
            .iter()
            .flat_map(|&(k1, k2)| {
                let kn = ((k1 * k1 + k2 * k2) as f64).sqrt();
                let a = amplitude * kn.powf(-decay);
                [Phase::Cos, Phase::Sin].map(|phase| NoiseMode {
                    k1,
                    k2,
                    phase,
                    amplitude: a,
                })
            })
            .take(count)
            .collect();
        Self::from_modes(grid, modes)
    }

    pub fn from_modes(grid: &Arc<TorusGrid>, modes: Vec<NoiseMode>) -> Result<Self> {
        let band = grid.n() as i64;
        for m in &modes {
            if m.k1 == 0 && m.k2 == 0 {
                return Err(invalid(
                    "modes",
                    "wavevector (0,0) has no divergence-free direction",
                ));
            }
            if 3 * m.k1.abs().max(m.k2.abs()) > band {
                return Err(invalid(
                    "modes",
                    format!("wavevector ({}, {}) outside the resolved band", m.k1, m.k2),
                ));
            }
            if !(m.amplitude.is_finite() && m.amplitude >= 0.0) {
                return Err(invalid(
                    "modes",
                    "amplitudes must be finite and non-negative",
                ));
            }
        }
        let xi: Vec<VectorField> = modes.iter().map(|m| m.field(grid)).collect();
        Ok(Self::from_fields_with_modes(grid, modes, xi))
    }

    /// Basis built from arbitrary vector fields (e.g. constant test fields).
    /// Divergence is not enforced here; see [`NoiseBasis::max_divergence`].
    pub fn from_fields(grid: &Arc<TorusGrid>, fields: Vec<VectorField>) -> Result<Self> {
        for f in &fields {
            grid.check_same(f.grid())?;
        }
        Ok(Self::from_fields_with_modes(grid, Vec::new(), fields))
    }

    fn from_fields_with_modes(
        grid: &Arc<TorusGrid>,
        modes: Vec<NoiseMode>,
        xi: Vec<VectorField>,
    ) -> Self {
        let grad_xi = xi
            .iter()
            .map(|f| [f.x.gradient(), f.y.gradient()])
            .collect();
        Self {
            grid: grid.clone(),
            modes,
            xi,
            grad_xi,
        }
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    pub fn grid(&self) -> &Arc<TorusGrid> {
        &self.grid
    }

    pub fn modes(&self) -> &[NoiseMode] {
        &self.modes
    }

    pub fn fields(&self) -> &[VectorField] {
        &self.xi
    }

    pub fn max_divergence(&self) -> f64 {
        self.xi
            .iter()
            .map(|f| f.divergence().max_abs())
            .fold(0.0, f64::max)
    }

    /// `Σᵢ ‖ξᵢ‖²_{W⁴,∞}` where each norm is the largest grid value of
    /// `|∂^α ξᵢᶜ|` over components and multi-indices `|α| ≤ 4`.
    pub fn summability(&self) -> f64 {
        self.xi.iter().map(|f| w4_inf_norm(f).powi(2)).sum()
    }

    /// `Σᵢ ‖ξᵢ‖²_∞` with the pointwise Euclidean magnitude.
    pub fn sup_sq_sum(&self) -> f64 {
        self.xi.iter().map(|f| f.max_magnitude().powi(2)).sum()
    }

    pub fn to_spec(&self) -> BasisSpec {
        BasisSpec::Modes {
            modes: self.modes.clone(),
        }
    }
}

fn w4_inf_norm(f: &VectorField) -> f64 {
    let mut best = 0.0f64;
    for comp in f.components() {
        let spec = comp.spectrum();
        for total in 0..=4u32 {
            for ax in 0..=total {
                let ay = total - ax;
                let mut s = spec.clone();
                if ax > 0 {
                    s = s.derivative(Axis::X, ax);
                }
                if ay > 0 {
                    s = s.derivative(Axis::Y, ay);
                }
                best = best.max(s.to_field().max_abs());
            }
        }
    }
    best
}

/// Scalar field together with its gradient.
pub(crate) struct WithGradient {
    pub value: ScalarField,
    pub grad: VectorField,
}

impl WithGradient {
    pub fn new(f: &ScalarField) -> Self {
        Self {
            value: f.clone(),
            grad: f.gradient(),
        }
    }
}

fn transport_raw(xi: &VectorField, g: &VectorField) -> ScalarField {
    let n2 = xi.x.values().len();
    let mut out = vec![0.0; n2];
    let (ax, ay, gx, gy) = (xi.x.values(), xi.y.values(), g.x.values(), g.y.values());
    for p in 0..n2 {
        out[p] = ax[p] * gx[p] + ay[p] * gy[p];
    }
    ScalarField::from_values(xi.grid(), out).expect("same grid")
}

/// `ℒ_ξ f = ξ·∇f` for a scalar field, dealiased.
pub fn lie_transport(xi: &VectorField, f: &ScalarField) -> Result<ScalarField> {
    xi.x.check_grid(f)?;
    Ok(transport_raw(xi, &f.gradient()).dealiased())
}

/// Component-wise `ℒ_ξ v` for a vector field.
pub fn lie_transport_vector(xi: &VectorField, v: &VectorField) -> Result<VectorField> {
    Ok(VectorField {
        x: lie_transport(xi, &v.x)?,
        y: lie_transport(xi, &v.y)?,
    })
}

/// `𝒜_ξ v = v¹ ∇ξ¹ + v² ∇ξ²`, dealiased.
pub fn momentum_stretch(xi: &VectorField, v: &VectorField) -> Result<VectorField> {
    xi.x.check_grid(&v.x)?;
    let g1 = xi.x.gradient();
    let g2 = xi.y.gradient();
    Ok(stretch_raw(&g1, &g2, v).dealiased())
}

fn stretch_raw(g1: &VectorField, g2: &VectorField, v: &VectorField) -> VectorField {
    let comp = |a: &ScalarField, b: &ScalarField| {
        let (v1, v2) = (v.x.values(), v.y.values());
        let vals = a
            .values()
            .iter()
            .zip(b.values())
            .enumerate()
            .map(|(p, (da, db))| v1[p] * da + v2[p] * db)
            .collect();
        ScalarField::from_values(v.grid(), vals).expect("same grid")
    };
    VectorField {
        x: comp(&g1.x, &g2.x),
        y: comp(&g1.y, &g2.y),
    }
}

/// Precomputed gradients of the three state components.
pub(crate) struct StateGradients {
    pub comps: [WithGradient; 3],
}

impl StateGradients {
    pub fn new(state: &State) -> Self {
        Self {
            comps: [
                WithGradient::new(&state.v.x),
                WithGradient::new(&state.v.y),
                WithGradient::new(&state.h),
            ],
        }
    }
}

impl NoiseBasis {
    fn check_index(&self, i: usize) -> Result<()> {
        if i < self.len() {
            Ok(())
        } else {
            Err(invalid(
                "i",
                format!("mode index {i} out of range 0..{}", self.len()),
            ))
        }
    }

    pub(crate) fn apply_prepared(&self, i: usize, g: &StateGradients) -> State {
        let xi = &self.xi[i];
        let [gx1, gx2] = &self.grad_xi[i];
        let v = VectorField {
            x: g.comps[0].value.clone(),
            y: g.comps[1].value.clone(),
        };
        let mut dv = stretch_raw(gx1, gx2, &v);
        let lx = transport_raw(xi, &g.comps[0].grad);
        let ly = transport_raw(xi, &g.comps[1].grad);
        dv.x.axpy(1.0, &lx);
        dv.y.axpy(1.0, &ly);
        let dh = transport_raw(xi, &g.comps[2].grad);
        State {
            v: dv.dealiased(),
            h: dh.dealiased(),
        }
    }

    /// `𝒢ᵢ(v, h) = (ℒᵢv + 𝒜ᵢv, ℒᵢh)`.
    pub fn g_op(&self, i: usize, state: &State) -> Result<State> {
        self.check_index(i)?;
        self.grid.check_same(state.grid())?;
        Ok(self.apply_prepared(i, &StateGradients::new(state)))
    }

    /// All `𝒢ᵢ(a)` together with `½ Σᵢ 𝒢ᵢ(𝒢ᵢ(a))`.
    pub fn noise_terms(&self, state: &State) -> Result<(Vec<State>, State)> {
        self.grid.check_same(state.grid())?;
        let grads = StateGradients::new(state);
        let mut correction = State::zeros(&self.grid);
        let mut gs = Vec::with_capacity(self.len());
        for i in 0..self.len() {
            let gi = self.apply_prepared(i, &grads);
            let ggi = self.apply_prepared(i, &StateGradients::new(&gi));
            correction.axpy(0.5, &ggi);
            gs.push(gi);
        }
        Ok((gs, correction))
    }

    /// All `𝒢ᵢ(a)`.
    pub fn g_all(&self, state: &State) -> Result<Vec<State>> {
        self.grid.check_same(state.grid())?;
        let grads = StateGradients::new(state);
        Ok((0..self.len())
            .map(|i| self.apply_prepared(i, &grads))
            .collect())
    }

    /// `½ Σᵢ 𝒢ᵢ(𝒢ᵢ(a))`: `½Σ(ℒᵢ+𝒜ᵢ)²v` and `½Σℒᵢ²h`.
    pub fn ito_correction(&self, state: &State) -> Result<State> {
        Ok(self.noise_terms(state)?.1)
    }
}

pub const GENERATOR_ID: &str = "chacha8-stream-per-mode/standard-normal";

/// Seed of ensemble member `index`: a splitmix64 mix of the pair, so
/// member streams do not depend on scheduling.
pub fn member_seed(base_seed: u64, index: u64) -> u64 {
    let mut z = base_seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Brownian increments `ΔWᵢ` for every mode and step.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisePath {
    pub dt: f64,
    pub seed: u64,
    pub generator: String,
    // increments[i][step]
    increments: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct NoisePathMeta {
    dt: f64,
    steps: usize,
    modes: usize,
    seed: u64,
    generator: String,
}

impl NoisePath {
    /// Independent `N(0, dt)` increments, one ChaCha stream per mode.
    pub fn sample(modes: usize, dt: f64, steps: usize, seed: u64) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        let sd = dt.sqrt();
        let increments = (0..modes)
            .map(|i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                (0..steps)
                    .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Ok(Self {
            dt,
            seed,
            generator: GENERATOR_ID.to_string(),
            increments,
        })
    }

    pub fn for_basis(basis: &NoiseBasis, dt: f64, steps: usize, seed: u64) -> Result<Self> {
        Self::sample(basis.len(), dt, steps, seed)
    }

    pub fn zero(modes: usize, dt: f64, steps: usize) -> Self {
        Self {
            dt,
            seed: 0,
            generator: "zero".to_string(),
            increments: vec![vec![0.0; steps]; modes],
        }
    }

    pub fn modes(&self) -> usize {
        self.increments.len()
    }

    pub fn steps(&self) -> usize {
        self.increments.first().map_or(usize::MAX, |r| r.len())
    }

    pub fn mode_increments(&self, i: usize) -> &[f64] {
        &self.increments[i]
    }

    pub fn increments_at(&self, step: usize) -> Vec<f64> {
        self.increments.iter().map(|r| r[step]).collect()
    }

    /// Same Brownian path on a grid `factor` times coarser.
    pub fn coarsen(&self, factor: usize) -> Result<Self> {
        if factor == 0 || (self.modes() > 0 && !self.steps().is_multiple_of(factor)) {
            return Err(SrswError::TimeGridMismatch(format!(
                "cannot coarsen {} steps by {factor}",
                self.steps()
            )));
        }
        let increments = self
            .increments
            .iter()
            .map(|r| r.chunks(factor).map(|c| c.iter().sum()).collect())
            .collect();
        Ok(Self {
            dt: self.dt * factor as f64,
            seed: self.seed,
            generator: self.generator.clone(),
            increments,
        })
    }

    /// Writes `<stem>.bin` (mode-major little-endian `f64`) and `<stem>.json`.
    pub fn save(&self, stem: &Path) -> Result<()> {
        let meta = NoisePathMeta {
            dt: self.dt,
            steps: if self.modes() == 0 { 0 } else { self.steps() },
            modes: self.modes(),
            seed: self.seed,
            generator: self.generator.clone(),
        };
        let mut bytes = Vec::new();
        for row in &self.increments {
            for v in row {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
        }
        fs::write(stem.with_extension("bin"), bytes)?;
        fs::write(
            stem.with_extension("json"),
            serde_json::to_string_pretty(&meta)?,
        )?;
        Ok(())
    }

    pub fn load(stem: &Path) -> Result<Self> {
        let meta: NoisePathMeta =
            serde_json::from_str(&fs::read_to_string(stem.with_extension("json"))?)?;
        let bytes = fs::read(stem.with_extension("bin"))?;
        if bytes.len() != meta.modes * meta.steps * 8 {
            return Err(SrswError::InsufficientData(
                "noise path payload size".into(),
            ));
        }
        let vals: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        let increments = if meta.steps == 0 {
            vec![Vec::new(); meta.modes]
        } else {
            vals.chunks(meta.steps).map(|c| c.to_vec()).collect()
        };
        Ok(Self {
            dt: meta.dt,
            seed: meta.seed,
            generator: meta.generator,
            increments,
        })
    }
}
