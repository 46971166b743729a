//! Numerical checks of the a priori estimates.
//!
//! Constants are fitted on a training half of a sample set and then
//! verified on the held-out half: a report passes when the worst held-out
//! ratio `lhs / rhs` is at most one. Fitted constants are inflated by a
//! safety margin before verification.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, truncation_factor};
use crate::error::{invalid, Result, SrswError};
use crate::initial::{random_state, RandomSpec};
use crate::noise::{lie_transport, member_seed, BasisSpec, NoiseBasis, NoisePath};
use crate::physics::{velocity, ParamValues, PhysicalParams, State};
use crate::spectral::{ScalarField, TorusGrid, VectorField};
use crate::stepper::{integrate, stable_dt, IntegrationConfig, Model, Scheme, TrajectoryRecord};

pub const DEFAULT_MARGIN: f64 = 2.0;
pub const RESOLUTION_TOLERANCE: f64 = 0.25;

#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub id: String,
    pub constants: BTreeMap<String, f64>,
    pub worst_ratio: f64,
    /// Worst ratio on the training half (informational).
    pub train_ratio: f64,
    pub n: usize,
    pub samples: usize,
    pub held_out: usize,
    pub paths: usize,
    /// Largest relative change of a fitted constant under grid refinement.
    pub resolution_drift: Option<f64>,
    pub resolution_stable: Option<bool>,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl EstimateReport {
    fn new(id: &str, n: usize) -> Self {
        Self {
            id: id.to_string(),
            constants: BTreeMap::new(),
            worst_ratio: 0.0,
            train_ratio: 0.0,
            n,
            samples: 0,
            held_out: 0,
            paths: 0,
            resolution_drift: None,
            resolution_stable: None,
            pass: true,
            notes: Vec::new(),
        }
    }

    fn finish(mut self) -> Self {
        self.pass = self.worst_ratio <= 1.0;
        self
    }

    /// Records the drift of the fitted constants against a refined run.
    pub fn attach_resolution(&mut self, refined: &EstimateReport) {
        let drift = constant_drift(&self.constants, &refined.constants);
        self.resolution_drift = Some(drift);
        let stable = drift < RESOLUTION_TOLERANCE;
        self.resolution_stable = Some(stable);
        self.notes.push(format!(
            "refined n={}: constants {:?}",
            refined.n, refined.constants
        ));
        if !stable {
            self.notes.push("discretization sensitivity".into());
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Largest relative change over the constants present in both maps.
pub fn constant_drift(a: &BTreeMap<String, f64>, b: &BTreeMap<String, f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (k, x) in a {
        if let Some(y) = b.get(k) {
            let scale = x.abs().max(y.abs());
            if scale > 0.0 && scale.is_finite() {
                worst = worst.max((x - y).abs() / scale);
            } else if x != y {
                worst = f64::INFINITY;
            }
        }
    }
    worst
}

/// Plain-text summary table.
pub fn reports_table(reports: &[EstimateReport]) -> String {
    let mut out = format!(
        "{:<22} {:>5} {:>12} {:>10} {:>8}  constants\n",
        "id", "pass", "worst_ratio", "res_drift", "samples"
    );
    for r in reports {
        let drift = r
            .resolution_drift
            .map(|d| format!("{d:.3}"))
            .unwrap_or_else(|| "-".into());
        let consts: Vec<String> = r
            .constants
            .iter()
            .map(|(k, v)| format!("{k}={v:.4e}"))
            .collect();
        let _ = writeln!(
            out,
            "{:<22} {:>5} {:>12.4e} {:>10} {:>8}  {}",
            r.id,
            r.pass,
            r.worst_ratio,
            drift,
            r.samples.max(r.paths),
            consts.join(" ")
        );
    }
    out
}

// ---------------------------------------------------------------------------
// fitting

/// One inequality instance `lhs ≤ fixed + Σⱼ cⱼ φⱼ`.
#[derive(Debug, Clone)]
pub struct FitSample {
    pub lhs: f64,
    pub fixed: f64,
    pub features: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn simplex_directions(m: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(m: usize, left: usize, steps: usize, cur: &mut Vec<f64>, out: &mut Vec<Vec<f64>>) {
        if m == 1 {
            cur.push(left as f64 / steps as f64);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for i in 0..=left {
            cur.push(i as f64 / steps as f64);
            rec(m - 1, left - i, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(m, steps, steps, &mut Vec::new(), &mut out);
    out
}

/// Smallest (in total training rhs) non-negative constants on a simplex
/// grid of directions that dominate every training sample, times `margin`.
pub fn dominating_fit(train: &[FitSample], margin: f64) -> Vec<f64> {
    let m = train.first().map_or(0, |s| s.features.len());
    if m == 0 {
        return Vec::new();
    }
    let steps = if m == 1 { 1 } else { 20 };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for w in simplex_directions(m, steps) {
        let mut scale: f64 = 0.0;
        let mut feasible = true;
        for s in train {
            let excess = s.lhs - s.fixed;
            if excess <= 0.0 {
                continue;
            }
            let d = dot(&w, &s.features);
            if d <= 0.0 {
                feasible = false;
                break;
            }
            scale = scale.max(excess / d);
        }
        if !feasible {
            continue;
        }
        let c: Vec<f64> = w.iter().map(|x| x * scale).collect();
        let obj: f64 = train.iter().map(|s| dot(&c, &s.features)).sum();
        let better = match &best {
            Some((b, _)) => obj < b * (1.0 - 1e-9),
            None => true,
        };
        if better {
            best = Some((obj, c));
        }
    }
    match best {
        Some((_, c)) => c.into_iter().map(|x| x * margin).collect(),
        None => vec![f64::INFINITY; m],
    }
}

pub fn sample_ratio(s: &FitSample, constants: &[f64]) -> f64 {
    if s.lhs <= 0.0 {
        return 0.0;
    }
    let rhs = s.fixed + dot(constants, &s.features);
    if rhs > 0.0 {
        s.lhs / rhs
    } else {
        f64::INFINITY
    }
}

fn worst(samples: &[FitSample], c: &[f64]) -> f64 {
    samples
        .iter()
        .map(|s| sample_ratio(s, c))
        .fold(0.0, f64::max)
}

/// Even indices train, odd indices are held out.
fn split<T: Clone>(items: &[T]) -> (Vec<T>, Vec<T>) {
    let train = items.iter().step_by(2).cloned().collect();
    let held = items.iter().skip(1).step_by(2).cloned().collect();
    (train, held)
}

/// Fit/verify on a sample list; degenerate samples must already be removed.
pub fn fit_and_verify(
    id: &str,
    n: usize,
    names: &[&str],
    samples: &[FitSample],
    margin: f64,
) -> EstimateReport {
    let mut rep = EstimateReport::new(id, n);
    rep.samples = samples.len();
    if samples.is_empty() {
        rep.notes
            .push("all samples degenerate; trivially satisfied".into());
        for name in names {
            rep.constants.insert(name.to_string(), 0.0);
        }
        return rep.finish();
    }
    let (train, held) = split(samples);
    let c = dominating_fit(&train, margin);
    for (name, v) in names.iter().zip(&c) {
        rep.constants.insert(name.to_string(), *v);
    }
    rep.held_out = held.len();
    rep.train_ratio = worst(&train, &c);
    rep.worst_ratio = if held.is_empty() {
        rep.notes.push("no held-out samples".into());
        f64::INFINITY
    } else {
        worst(&held, &c)
    };
    rep.finish()
}

/// Fits `lhs ≤ b q³ − c q` on `(q, lhs)` pairs: `c` sits at the slowest
/// observed decay rate divided by the margin (multiplied when negative),
/// `b` at the margin times the smallest dominating value.
pub fn fit_cubic_minus_linear(train: &[(f64, f64)], margin: f64) -> (f64, f64) {
    let rmin = train
        .iter()
        .filter(|(q, _)| *q > 0.0)
        .map(|(q, l)| -l / q)
        .fold(f64::INFINITY, f64::min);
    let c = if !rmin.is_finite() {
        0.0
    } else if rmin > 0.0 {
        rmin / margin
    } else {
        rmin * margin
    };
    let b = train
        .iter()
        .filter(|(q, _)| *q > 0.0)
        .map(|(q, l)| (l + c * q) / q.powi(3))
        .fold(0.0, f64::max);
    (margin * b, c)
}

/// `(lhs + c q) / (b q³)`, at most one iff `lhs ≤ b q³ − c q`.
pub fn cubic_ratio(q: f64, lhs: f64, b: f64, c: f64) -> f64 {
    let excess = lhs + c * q;
    if excess <= 0.0 {
        return 0.0;
    }
    let rhs = b * q.powi(3);
    if rhs > 0.0 {
        excess / rhs
    } else {
        f64::INFINITY
    }
}

// ---------------------------------------------------------------------------
// samples and multi-index pairings

/// Specification of a resolution-independent random state ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleSpec {
    pub count: usize,
    pub seed: u64,
    pub kmax: i32,
    pub decay: f64,
    pub h_weight: f64,
    /// `‖a‖_{1,2}` is drawn log-uniformly from this range.
    pub norm_min: f64,
    pub norm_max: f64,
}

impl Default for SampleSpec {
    fn default() -> Self {
        Self {
            count: 100,
            seed: 20_240_601,
            kmax: 4,
            decay: 2.0,
            h_weight: 0.5,
            norm_min: 0.05,
            norm_max: 2.0,
        }
    }
}

pub fn sample_states(grid: &Arc<TorusGrid>, spec: &SampleSpec) -> Result<Vec<State>> {
    if !(spec.norm_min > 0.0 && spec.norm_max >= spec.norm_min) {
        return Err(invalid("samples.norm", "need 0 < norm_min <= norm_max"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let targets: Vec<(u64, f64)> = (0..spec.count)
        .map(|i| {
            let u: f64 = rng.random();
            let norm = spec.norm_min * (spec.norm_max / spec.norm_min).powf(u);
            (member_seed(spec.seed, i as u64), norm)
        })
        .collect();
    targets
        .into_par_iter()
        .map(|(seed, norm)| {
            let s = random_state(
                grid,
                &RandomSpec {
                    seed,
                    kmax: spec.kmax,
                    decay: spec.decay,
                    h_weight: spec.h_weight,
                },
            )?;
            Ok(s.scaled(norm / s.norm12()))
        })
        .collect()
}

/// `⟨∂^α f, ∂^α g⟩` for `α = (α₁, α₂)`, computed spectrally.
pub fn multi_index_inner(f: &ScalarField, g: &ScalarField, alpha: (u32, u32)) -> Result<f64> {
    f.check_grid(g)?;
    let grid = f.grid();
    let n = grid.n();
    let s = grid.wavenumber_scale();
    let (fs, gs) = (f.spectrum(), g.spectrum());
    let mut total = 0.0;
    for (idx, (a, b)) in fs.coefficients().iter().zip(gs.coefficients()).enumerate() {
        let (k1, k2) = grid.wavenumber_at(idx);
        let w = (k1 as f64 * s).powi(2 * alpha.0 as i32) * (k2 as f64 * s).powi(2 * alpha.1 as i32);
        total += grid.parseval_weight(idx / n) * w * (a * b.conj()).re;
    }
    Ok(total * grid.cell_area() / (n * n) as f64)
}

/// All `α` with `|α| ≤ order`.
pub fn multi_indices(order: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    for total in 0..=order {
        for a in 0..=total {
            out.push((a, total - a));
        }
    }
    out
}

fn flux_divergence(y: &ScalarField, x: &VectorField) -> ScalarField {
    VectorField {
        x: y.product_unchecked(&x.x),
        y: y.product_unchecked(&x.y),
    }
    .divergence()
}

// ---------------------------------------------------------------------------
// uniqueness-type estimate for the flux difference

/// `T₁ = f_R(a¹)∇·(Y¹X̄)`, `T₂ = f_R(a²)∇·(ȲX²)`,
/// `T₃ = (f_R(a¹) − f_R(a²))∇·(Y¹X²)` with `Y = h`, `X = u`.
pub fn flux_difference_terms(
    a1: &State,
    a2: &State,
    params: &PhysicalParams,
    r: f64,
) -> Result<[ScalarField; 3]> {
    let u1 = velocity(a1, params)?;
    let u2 = velocity(a2, params)?;
    let f1 = truncation_factor(a1.norm12(), Some(r));
    let f2 = truncation_factor(a2.norm12(), Some(r));
    let xbar = &u1 - &u2;
    let ybar = &a1.h - &a2.h;
    Ok([
        flux_divergence(&a1.h, &xbar).scaled(f1),
        flux_divergence(&ybar, &u2).scaled(f2),
        flux_divergence(&a1.h, &u2).scaled(f1 - f2),
    ])
}

/// `‖Z‖ = ‖a¹‖⁴_{k,2} + ‖a²‖⁴_{k,2}`.
pub fn z_norm(a1: &State, a2: &State, k: u32) -> f64 {
    a1.sobolev_sq(k).powi(2) + a2.sobolev_sq(k).powi(2)
}

fn advective_sample(
    a1: &State,
    a2: &State,
    params: &PhysicalParams,
    k: u32,
    zeta: f64,
    r: f64,
) -> Result<Option<FitSample>> {
    let abar = a1.difference(a2);
    let ak = abar.sobolev_sq(k);
    if ak == 0.0 {
        return Ok(None);
    }
    let [t1, t2, t3] = flux_difference_terms(a1, a2, params, r)?;
    let q = &(&t1 + &t2) + &t3;
    let mut lhs: f64 = 0.0;
    for alpha in multi_indices(k) {
        lhs = lhs.max(multi_index_inner(&abar.h, &q, alpha)?.abs());
    }
    Ok(Some(FitSample {
        lhs,
        fixed: zeta * abar.sobolev_sq(k + 1),
        features: vec![z_norm(a1, a2, k) * ak],
    }))
}

/// `|⟨∂^α ā, ∂^α Q⟩| ≤ ζ‖ā‖²_{k+1,2} + C(ζ,R)‖Z‖‖ā‖²_{k,2}` for `|α| ≤ k`.
pub fn check_advective_estimate(
    pairs: &[(State, State)],
    params: &PhysicalParams,
    k: u32,
    zeta: f64,
    r: f64,
    margin: f64,
) -> Result<EstimateReport> {
    if k > 1 {
        return Err(invalid("k", format!("must be 0 or 1, got {k}")));
    }
    if !(zeta > 0.0) {
        return Err(invalid("zeta", "must be positive"));
    }
    let samples: Vec<Option<FitSample>> = pairs
        .par_iter()
        .map(|(a, b)| advective_sample(a, b, params, k, zeta, r))
        .collect::<Result<_>>()?;
    let skipped = samples.iter().filter(|s| s.is_none()).count();
    let used: Vec<FitSample> = samples.into_iter().flatten().collect();
    let n = params.grid().n();
    let mut rep = fit_and_verify(&format!("advective_k{k}"), n, &["C_zeta_R"], &used, margin);
    rep.constants.insert("zeta".into(), zeta);
    rep.constants.insert("R".into(), r);
    if skipped > 0 {
        rep.notes
            .push(format!("{skipped} degenerate pairs skipped"));
    }
    Ok(rep)
}

// ---------------------------------------------------------------------------
// growth of the nonlinear terms

/// `|⟨v, ℒ_u v⟩|` (the `α = 0` pairing for `k = 1`).
pub fn growth_a_lhs(state: &State, params: &PhysicalParams) -> Result<f64> {
    let u = velocity(state, params)?;
    let mut total = 0.0;
    for c in [&state.v.x, &state.v.y] {
        total += crate::spectral::inner_product(c, &lie_transport(&u, c)?)?;
    }
    Ok(total.abs())
}

/// `|⟨Δh, ∇·(hu)⟩|`.
pub fn growth_b_lhs(state: &State, params: &PhysicalParams) -> Result<f64> {
    let u = velocity(state, params)?;
    let div = flux_divergence(&state.h, &u);
    Ok(crate::spectral::inner_product(&state.h.laplacian(), &div)?.abs())
}

fn growth_samples(
    states: &[State],
    params: &PhysicalParams,
) -> Result<(Vec<FitSample>, Vec<FitSample>)> {
    let pairs: Vec<(Option<FitSample>, Option<FitSample>)> = states
        .par_iter()
        .map(|s| {
            let la = growth_a_lhs(s, params)?;
            let v12 = crate::spectral::sobolev_norm(&[&s.v.x, &s.v.y], 1)?;
            let v22 = crate::spectral::sobolev_norm(&[&s.v.x, &s.v.y], 2)?;
            let a = (la > 0.0).then(|| FitSample {
                lhs: la,
                fixed: 0.0,
                features: vec![v22 * v22, v12.powi(6)],
            });
            let lb = growth_b_lhs(s, params)?;
            let u = velocity(s, params)?;
            let lap_h = s.h.laplacian();
            let lap_u = u.laplacian();
            let h12 = crate::spectral::sobolev_norm(&[&s.h], 1)?;
            let u12 = crate::spectral::sobolev_norm(&[&u.x, &u.y], 1)?;
            let b = (lb > 0.0).then(|| FitSample {
                lhs: lb,
                fixed: 0.0,
                features: vec![
                    crate::spectral::sobolev_norm_sq(&lap_h, 0).unwrap_or(f64::NAN),
                    crate::spectral::sobolev_norm_sq(&lap_u.x, 0).unwrap_or(f64::NAN)
                        + crate::spectral::sobolev_norm_sq(&lap_u.y, 0).unwrap_or(f64::NAN),
                    h12.powi(6) + u12.powi(6),
                ],
            });
            Ok((a, b))
        })
        .collect::<Result<_>>()?;
    let (a, b): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
    Ok((
        a.into_iter().flatten().collect(),
        b.into_iter().flatten().collect(),
    ))
}

/// Fit/verify of `|⟨Y, ℒ_X Y⟩| ≤ C₁‖Y‖²_{2,2} + C₂‖Y‖⁶_{1,2}` (`Y = v`,
/// `X = u`) and `|⟨ΔY, ∇·(YX)⟩| ≤ C₃‖ΔY‖² + C₄‖ΔX‖² + C₅(‖Y‖⁶_{1,2} +
/// ‖X‖⁶_{1,2})` (`Y = h`).
pub fn check_nonlinear_growth(
    states: &[State],
    params: &PhysicalParams,
    margin: f64,
) -> Result<[EstimateReport; 2]> {
    let (a, b) = growth_samples(states, params)?;
    let n = params.grid().n();
    Ok([
        fit_and_verify("growth_a", n, &["C1", "C2"], &a, margin),
        fit_and_verify("growth_b", n, &["C3", "C4", "C5"], &b, margin),
    ])
}

/// Fit/verify of `f_R²‖ℒ_u v‖² ≤ C(R)(‖v‖²_{2,2} + 1)` and
/// `f_R²‖∇·(hu)‖² ≤ C(R)(‖v‖²_{2,2} + ‖h‖²_{2,2} + 1)`.
pub fn check_truncated_l2(
    states: &[State],
    params: &PhysicalParams,
    r: f64,
    margin: f64,
) -> Result<[EstimateReport; 2]> {
    let rep = dynamics::nonlinear_l2_bound_check(states, params, r)?;
    let mut adv = Vec::new();
    let mut flux = Vec::new();
    for (i, s) in states.iter().enumerate() {
        let v22 = crate::spectral::sobolev_norm(&[&s.v.x, &s.v.y], 2)?.powi(2);
        let h22 = crate::spectral::sobolev_norm(&[&s.h], 2)?.powi(2);
        adv.push(FitSample {
            lhs: rep.advective_lhs[i],
            fixed: 0.0,
            features: vec![v22 + 1.0],
        });
        flux.push(FitSample {
            lhs: rep.flux_lhs[i],
            fixed: 0.0,
            features: vec![v22 + h22 + 1.0],
        });
    }
    let n = params.grid().n();
    let mut a = fit_and_verify("truncated_l2_advection", n, &["C_R"], &adv, margin);
    let mut f = fit_and_verify("truncated_l2_flux", n, &["C_R"], &flux, margin);
    a.constants.insert("R".into(), r);
    f.constants.insert("R".into(), r);
    Ok([a, f])
}

/// Scaling exponent of `lhs(λ a)` in `λ`, by least squares in log-log.
pub fn scaling_exponent(
    state: &State,
    lambdas: &[f64],
    lhs: impl Fn(&State) -> Result<f64>,
) -> Result<f64> {
    let mut pts = Vec::new();
    for &l in lambdas {
        let v = lhs(&state.scaled(l))?;
        if v > 0.0 {
            pts.push((l.ln(), v.ln()));
        }
    }
    if pts.len() < 2 {
        return Err(SrswError::InsufficientData(
            "scaling sweep has < 2 positive values".into(),
        ));
    }
    Ok(linear_fit(&pts).1)
}

/// Least-squares line `y = a + b x`; returns `(a, b)`.
pub fn linear_fit(pts: &[(f64, f64)]) -> (f64, f64) {
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

// ---------------------------------------------------------------------------
// energy: drift/diffusion decomposition and envelope

/// `F̃(a) = 2⟨a, ito_rhs(a)⟩_{1,2} + Σᵢ‖𝒢ᵢa‖²_{1,2}` and
/// `G̃ᵢ(a) = −2⟨a, 𝒢ᵢa⟩_{1,2}`, the drift and diffusion of `‖a‖²_{1,2}`.
pub fn energy_terms(
    state: &State,
    params: &PhysicalParams,
    basis: &NoiseBasis,
    r: Option<f64>,
) -> Result<(f64, Vec<f64>)> {
    let rhs = dynamics::ito_rhs(state, params, basis, r)?;
    let mut f = 2.0 * state.h1_inner(&rhs);
    let mut g = Vec::with_capacity(basis.len());
    for gi in basis.g_all(state)? {
        f += gi.h1_inner(&gi);
        g.push(-2.0 * state.h1_inner(&gi));
    }
    Ok((f, g))
}

/// Fit/verify of `F̃ ≤ C₁q³ − C₂q` and `Σᵢ|G̃ᵢ|² ≤ C₃q`, `q = ‖a‖²_{1,2}`.
///
/// `Σᵢ|G̃ᵢ|²` is quartic in `a`, so the linear bound only holds on a
/// bounded-amplitude set: `C₃` is the margin times the largest training
/// value of `Σᵢ|G̃ᵢ|²/q²`, times the a priori bound `q_bound ≥ q`.
pub fn check_drift_diffusion(
    states: &[State],
    params: &PhysicalParams,
    basis: &NoiseBasis,
    r: Option<f64>,
    q_bound: f64,
    margin: f64,
) -> Result<[EstimateReport; 2]> {
    if !(q_bound > 0.0) {
        return Err(invalid("q_bound", "must be positive"));
    }
    let data: Vec<(f64, f64, f64)> = states
        .par_iter()
        .map(|s| {
            let (f, g) = energy_terms(s, params, basis, r)?;
            Ok((s.energy12(), f, g.iter().map(|x| x * x).sum::<f64>()))
        })
        .collect::<Result<_>>()?;
    let data: Vec<_> = data.into_iter().filter(|d| d.0 > 0.0).collect();
    let n = params.grid().n();

    let mut drift = EstimateReport::new("energy_drift", n);
    drift.samples = data.len();
    let (train, held) = split(&data);
    let pairs: Vec<(f64, f64)> = train.iter().map(|d| (d.0, d.1)).collect();
    let (c1, c2) = fit_cubic_minus_linear(&pairs, margin);
    drift.constants.insert("C1".into(), c1);
    drift.constants.insert("C2".into(), c2);
    let ratio = |set: &[(f64, f64, f64)]| {
        set.iter()
            .map(|d| cubic_ratio(d.0, d.1, c1, c2))
            .fold(0.0, f64::max)
    };
    drift.train_ratio = ratio(&train);
    drift.held_out = held.len();
    drift.worst_ratio = if held.is_empty() {
        f64::INFINITY
    } else {
        ratio(&held)
    };

    let mut diff = EstimateReport::new("energy_diffusion", n);
    diff.samples = data.len();
    diff.held_out = held.len();
    let c3 = margin * q_bound * train.iter().map(|d| d.2 / (d.0 * d.0)).fold(0.0, f64::max);
    diff.constants.insert("C3".into(), c3);
    diff.constants.insert("q_bound".into(), q_bound);
    let ratio3 = |set: &[(f64, f64, f64)]| {
        set.iter()
            .map(|d| if d.2 == 0.0 { 0.0 } else { d.2 / (c3 * d.0) })
            .fold(0.0, f64::max)
    };
    diff.train_ratio = ratio3(&train);
    diff.worst_ratio = if held.is_empty() {
        f64::INFINITY
    } else {
        ratio3(&held)
    };
    if let Some(big) = data.iter().find(|d| d.0 > q_bound) {
        diff.notes
            .push(format!("sample with q={} exceeds q_bound", big.0));
        diff.worst_ratio = f64::INFINITY;
    }
    diff.notes
        .push("sum |G_i|^2 scales like q^2; C3 holds on the set q <= q_bound".into());
    let diff = diff.finish();
    Ok([drift.finish(), diff])
}

/// Envelope fit result with the ODE solution on the record's time grid.
#[derive(Debug, Clone, Serialize)]
pub struct Envelope {
    pub b: f64,
    pub c: f64,
    /// `√(c/b)`, the positive zero of `bq³ − cq` (infinite when `b = 0`).
    pub fixed_point: f64,
    pub times: Vec<f64>,
    pub q: Vec<f64>,
    pub data: Vec<f64>,
}

/// Fits `d_t q ≤ bq³ − cq` with `q = ‖a‖²_{1,2}` from forward differences
/// of the record (even steps train), integrates the ODE by explicit Euler
/// on the same grid and checks `‖a_t‖²_{1,2} ≤ q_t` at every recorded
/// time.
pub fn check_energy_envelope(
    traj: &TrajectoryRecord,
    margin: f64,
) -> Result<(EstimateReport, Envelope)> {
    let data: Vec<f64> = traj.norm12.iter().map(|x| x * x).collect();
    let finite = data.iter().take_while(|x| x.is_finite()).count();
    let data = &data[..finite];
    if data.len() < 3 {
        return Err(SrswError::InsufficientData(format!(
            "{} finite samples in trajectory",
            data.len()
        )));
    }
    let times = &traj.times[..finite];
    let incr: Vec<(f64, f64)> = (0..data.len() - 1)
        .map(|k| (data[k], (data[k + 1] - data[k]) / (times[k + 1] - times[k])))
        .collect();
    let (train, held) = split(&incr);
    let (b, mut c) = fit_cubic_minus_linear(&train, margin);
    let dt_max = times.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
    if c * dt_max > 1.0 {
        c = 1.0 / dt_max;
    }
    let mut q = Vec::with_capacity(data.len());
    q.push(data[0]);
    for k in 0..data.len() - 1 {
        let qk = q[k];
        q.push(qk + (times[k + 1] - times[k]) * (b * qk.powi(3) - c * qk));
    }
    let mut rep = EstimateReport::new(
        "envelope",
        traj.state_at_step(0).map_or(0, |s| s.grid().n()),
    );
    rep.samples = incr.len();
    rep.held_out = held.len();
    rep.train_ratio = train
        .iter()
        .map(|(qq, l)| cubic_ratio(*qq, *l, b, c))
        .fold(0.0, f64::max);
    let held_ratio = held
        .iter()
        .map(|(qq, l)| cubic_ratio(*qq, *l, b, c))
        .fold(0.0, f64::max);
    let env_ratio = data
        .iter()
        .zip(&q)
        .map(|(d, e)| if *d == 0.0 { 0.0 } else { d / e })
        .fold(0.0, f64::max);
    rep.worst_ratio = env_ratio;
    rep.constants.insert("b".into(), b);
    rep.constants.insert("c".into(), c);
    let fixed_point = if b > 0.0 && c > 0.0 {
        (c / b).sqrt()
    } else if b == 0.0 && c >= 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    rep.notes.push(format!(
        "held-out increment ratio {held_ratio:.4}; fixed point {fixed_point:.4e}"
    ));
    if traj.blown_up {
        rep.notes.push(format!(
            "restricted to the pre-blow-up record (t <= {})",
            traj.last_finite_time
        ));
    }
    let qmax = q.iter().cloned().fold(0.0, f64::max);
    for hit in &traj.tau_r {
        if qmax < hit.level * hit.level && hit.time.is_some() {
            rep.notes
                .push(format!("tau^R hit at R={} below envelope", hit.level));
            rep.worst_ratio = rep.worst_ratio.max(f64::INFINITY);
        }
    }
    Ok((
        rep.finish(),
        Envelope {
            b,
            c,
            fixed_point,
            times: times.to_vec(),
            q,
            data: data.to_vec(),
        },
    ))
}

/// Largest ratio `x_{k+1}/x_k` after the first `transient` fraction of the
/// series; at most one means monotone decay.
pub fn post_transient_growth(series: &[f64], transient: f64) -> f64 {
    let start = ((series.len() as f64) * transient).floor() as usize;
    series[start.min(series.len())..]
        .windows(2)
        .map(|w| {
            if w[0] > 0.0 {
                w[1] / w[0]
            } else if w[1] > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// continuity in the initial data

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuityConfig {
    pub t_final: f64,
    /// Defaults to the stability rule at `a₀`.
    pub dt: Option<f64>,
    #[serde(rename = "R")]
    pub cutoff: Option<f64>,
    #[serde(rename = "M")]
    pub m_level: f64,
    pub deltas: Vec<f64>,
    pub paths: usize,
    pub base_seed: u64,
    pub scheme: Scheme,
}

impl Default for ContinuityConfig {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            dt: None,
            cutoff: Some(2.0),
            m_level: 10.0,
            deltas: vec![1e-2, 1e-3, 1e-4],
            paths: 32,
            base_seed: 7,
            scheme: Scheme::EmIto,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ContinuityResult {
    pub times: Vec<f64>,
    pub deltas: Vec<f64>,
    /// `E‖ā_t‖²_{1,2} / ‖ā₀‖²_{1,2}` per delta (zeros for `δ = 0`).
    pub mean_ratio: Vec<Vec<f64>>,
    /// Largest `‖ā_t‖` over all paths for `δ = 0` (exactly zero expected).
    pub zero_delta_sup: Option<f64>,
    pub report: EstimateReport,
}

fn stop_index(a: &TrajectoryRecord, b: &TrajectoryRecord, m: f64) -> usize {
    let len = a.len().min(b.len());
    (0..len)
        .find(|&k| a.t22[k] >= m || b.t22[k] >= m)
        .unwrap_or(len - 1)
}

/// Paired-path study of `E‖ā_{t∧τ_M}‖²_{1,2} ≤ Ce^{Ct}‖ā₀‖²_{1,2}` from
/// `a₀` and `a₀ + δφ` on common noise paths.
pub fn check_continuity_in_ic(
    a0: &State,
    direction: &State,
    params: &PhysicalParams,
    basis: &NoiseBasis,
    cfg: &ContinuityConfig,
) -> Result<ContinuityResult> {
    if cfg.paths == 0 {
        return Err(invalid("paths", "must be at least 1"));
    }
    let dt = match cfg.dt {
        Some(dt) => dt,
        None => {
            let (d, _) = stable_dt(a0, params, basis, cfg.scheme)?;
            cfg.t_final / (cfg.t_final / d).ceil()
        }
    };
    let mut ic = IntegrationConfig::new(cfg.scheme, cfg.t_final, dt).with_cutoff(cfg.cutoff);
    ic.monitors.m_levels = vec![cfg.m_level];
    let steps = ic.steps();
    let model = Model {
        params,
        basis,
        cutoff: cfg.cutoff,
    };
    let starts: Vec<State> = cfg
        .deltas
        .iter()
        .map(|d| {
            let mut s = a0.clone();
            s.axpy(*d, direction);
            s
        })
        .collect();
    let per_path: Vec<Vec<Vec<f64>>> = (0..cfg.paths)
        .into_par_iter()
        .map(|p| {
            let path =
                NoisePath::for_basis(basis, dt, steps, member_seed(cfg.base_seed, p as u64))?;
            let base = integrate(a0, model, &path, &ic)?;
            starts
                .iter()
                .map(|s| {
                    let pert = integrate(s, model, &path, &ic)?;
                    let stop = stop_index(&base, &pert, cfg.m_level);
                    let mut out = Vec::with_capacity(steps + 1);
                    for k in 0..=steps {
                        let kk = k.min(stop);
                        let (x, y) = (
                            base.state_at_step(kk).expect("all states stored"),
                            pert.state_at_step(kk).expect("all states stored"),
                        );
                        out.push(y.difference(x).energy12());
                    }
                    Ok(out)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    let times: Vec<f64> = (0..=steps).map(|k| k as f64 * dt).collect();
    let mut mean_ratio = Vec::new();
    let mut zero_sup = None;
    for (j, d) in cfg.deltas.iter().enumerate() {
        if *d == 0.0 {
            let sup = per_path
                .iter()
                .flat_map(|p| p[j].iter())
                .cloned()
                .fold(0.0, f64::max);
            zero_sup = Some(sup.sqrt());
            mean_ratio.push(vec![0.0; times.len()]);
            continue;
        }
        let mut mean = vec![0.0; times.len()];
        for p in &per_path {
            let d0 = p[j][0];
            for k in 0..times.len() {
                mean[k] += p[j][k] / d0 / cfg.paths as f64;
            }
        }
        mean_ratio.push(mean);
    }

    let n = params.grid().n();
    let mut rep = EstimateReport::new("continuity", n);
    rep.paths = cfg.paths;
    rep.samples = times.len();
    let nonzero: Vec<usize> = (0..cfg.deltas.len())
        .filter(|&j| cfg.deltas[j] != 0.0)
        .collect();
    let mut indep: f64 = 1.0;
    for (a, &i) in nonzero.iter().enumerate() {
        for &j in &nonzero[a + 1..] {
            for (&x, &y) in mean_ratio[i].iter().zip(&mean_ratio[j]) {
                let f = if x > 0.0 && y > 0.0 {
                    (x / y).max(y / x)
                } else if x == y {
                    1.0
                } else {
                    f64::INFINITY
                };
                indep = indep.max(f);
            }
        }
    }
    let mut resid_frac = 0.0;
    if let Some(&jmin) = nonzero
        .iter()
        .min_by(|a, b| cfg.deltas[**a].abs().total_cmp(&cfg.deltas[**b].abs()))
    {
        let pts: Vec<(f64, f64)> = times
            .iter()
            .zip(&mean_ratio[jmin])
            .filter(|(_, r)| **r > 0.0)
            .map(|(t, r)| (*t, r.ln()))
            .collect();
        if pts.len() >= 2 {
            let (a, b) = linear_fit(&pts);
            let resid: Vec<f64> = pts.iter().map(|(t, y)| y - (a + b * t)).collect();
            let max_abs = resid.iter().map(|r| r.abs()).fold(0.0, f64::max);
            let max_pos = resid.iter().cloned().fold(0.0, f64::max);
            let ymax = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let ymin = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let range = ymax - ymin;
            resid_frac = if range > 0.0 { max_abs / range } else { 0.0 };
            let prefactor = (a + max_pos).exp();
            rep.constants.insert("prefactor".into(), prefactor);
            rep.constants.insert("rate".into(), b);
            rep.constants
                .insert("gronwall_C".into(), prefactor.max(b).max(0.0));
        }
    }
    rep.constants.insert("delta_factor".into(), indep);
    rep.constants.insert("residual_fraction".into(), resid_frac);
    rep.worst_ratio = (indep / 2.0).max(resid_frac / 0.1);
    rep.notes.push(format!(
        "ratio = max(delta_factor/2, residual_fraction/0.1); dt={dt}, M={}",
        cfg.m_level
    ));
    if let Some(z) = zero_sup {
        rep.notes.push(format!("delta=0 sup difference {z:e}"));
        if z != 0.0 {
            rep.worst_ratio = f64::INFINITY;
        }
    }
    Ok(ContinuityResult {
        times,
        deltas: cfg.deltas.clone(),
        mean_ratio,
        zero_delta_sup: zero_sup,
        report: rep.finish(),
    })
}

// ---------------------------------------------------------------------------
// staying probability

/// Wilson score interval for `k` successes out of `n` at normal quantile `z`.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let centre = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct BlowupConfig {
    /// Level `C` for `sup_t ‖a_t‖²_{1,2} < C`.
    pub level: f64,
    pub t_final: f64,
    pub dt: Option<f64>,
    pub paths: usize,
    pub base_seed: u64,
    /// Initial norms `‖a₀‖_{1,2}` of the swept family.
    pub norms: Vec<f64>,
    pub scheme: Scheme,
}

impl Default for BlowupConfig {
    fn default() -> Self {
        Self {
            level: 1.0,
            t_final: 2.0,
            dt: None,
            paths: 200,
            base_seed: 11,
            norms: vec![0.1],
            scheme: Scheme::EmIto,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct StayingEstimate {
    pub norm12_0: f64,
    /// `‖a₀‖²_{1,2} / C`.
    pub relative_energy: f64,
    pub staying: usize,
    pub paths: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// `1 − ‖a₀‖²_{1,2}/C`, clipped at zero.
    pub lower_bound: f64,
}

/// Monte Carlo fraction of untruncated paths with `sup_{t≤T}‖a_t‖²_{1,2} < C`
/// for `a₀ = ρ·φ/‖φ‖_{1,2}` over the swept `ρ`.
pub fn blowup_probability(
    direction: &State,
    params: &PhysicalParams,
    basis: &NoiseBasis,
    cfg: &BlowupConfig,
) -> Result<Vec<StayingEstimate>> {
    if !(cfg.level > 0.0) {
        return Err(invalid("level", "must be positive"));
    }
    if cfg.paths == 0 {
        return Err(invalid("paths", "must be at least 1"));
    }
    let dn = direction.norm12();
    let mut out = Vec::new();
    for &rho in &cfg.norms {
        let a0 = if dn > 0.0 {
            direction.scaled(rho / dn)
        } else {
            direction.clone()
        };
        let dt = match cfg.dt {
            Some(dt) => dt,
            None => {
                let (d, _) = stable_dt(&a0, params, basis, cfg.scheme)?;
                cfg.t_final / (cfg.t_final / d).ceil()
            }
        };
        let mut ic = IntegrationConfig::new(cfg.scheme, cfg.t_final, dt);
        // any excursion past the level ends the path
        ic.monitors.ceiling = cfg.level.sqrt() * (1.0 + 1e-12);
        ic.store_every = 0;
        let steps = ic.steps();
        let model = Model {
            params,
            basis,
            cutoff: None,
        };
        let flags: Vec<bool> = (0..cfg.paths)
            .into_par_iter()
            .map(|p| {
                let path =
                    NoisePath::for_basis(basis, dt, steps, member_seed(cfg.base_seed, p as u64))?;
                let rec = integrate(&a0, model, &path, &ic)?;
                let sup = rec.norm12.iter().cloned().fold(0.0, f64::max);
                Ok(!rec.blown_up && sup * sup < cfg.level)
            })
            .collect::<Result<_>>()?;
        let k = flags.iter().filter(|f| **f).count();
        let (lo, hi) = wilson_interval(k, cfg.paths, 1.96);
        let rel = a0.norm12().powi(2) / cfg.level;
        out.push(StayingEstimate {
            norm12_0: a0.norm12(),
            relative_energy: rel,
            staying: k,
            paths: cfg.paths,
            probability: k as f64 / cfg.paths as f64,
            ci_low: lo,
            ci_high: hi,
            lower_bound: (1.0 - rel).max(0.0),
        });
    }
    Ok(out)
}

/// Nonincreasing staying probability in `‖a₀‖` up to overlapping intervals.
pub fn staying_monotone(est: &[StayingEstimate]) -> bool {
    let mut sorted: Vec<&StayingEstimate> = est.iter().collect();
    sorted.sort_by(|a, b| a.norm12_0.total_cmp(&b.norm12_0));
    sorted
        .windows(2)
        .all(|w| w[1].probability <= w[0].probability || w[1].ci_low <= w[0].ci_high)
}

// ---------------------------------------------------------------------------
// suites

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvelopeSuite {
    pub t_final: f64,
    /// `‖a₀‖_{1,2}` of the deterministic runs.
    pub norms: Vec<f64>,
    pub seed: u64,
    pub h_weight: f64,
    /// Number of states for the `F̃`/`G̃` fits.
    pub states: usize,
    pub transient: f64,
}

impl Default for EnvelopeSuite {
    fn default() -> Self {
        Self {
            t_final: 2.0,
            norms: vec![1e-3, 0.3, 3.0],
            seed: 5,
            h_weight: 0.1,
            states: 50,
            transient: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ContinuitySuite {
    pub norm12_0: f64,
    pub seed: u64,
    pub study: ContinuityConfig,
}

impl Default for ContinuitySuite {
    fn default() -> Self {
        Self {
            norm12_0: 0.2,
            seed: 3,
            study: ContinuityConfig::default(),
        }
    }
}

/// Settings shared by the verification suites.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    /// Primary resolution first; later entries are refinement checks.
    pub resolutions: Vec<usize>,
    pub length: f64,
    pub params: ParamValues,
    pub basis: BasisSpec,
    pub samples: SampleSpec,
    #[serde(rename = "R")]
    pub cutoff: f64,
    /// `ζ` for `k = 0` and `k = 1`.
    pub zeta: [f64; 2],
    pub margin: f64,
    pub envelope: EnvelopeSuite,
    pub continuity: ContinuitySuite,
    pub blowup: BlowupConfig,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            resolutions: vec![64, 128],
            length: 2.0 * std::f64::consts::PI,
            params: ParamValues::default(),
            basis: BasisSpec::default(),
            samples: SampleSpec::default(),
            cutoff: 2.0,
            zeta: [3e-4, 1e-4],
            margin: DEFAULT_MARGIN,
            envelope: EnvelopeSuite::default(),
            continuity: ContinuitySuite::default(),
            blowup: BlowupConfig::default(),
        }
    }
}

pub const SUITES: [&str; 6] = [
    "advective",
    "growth",
    "envelope",
    "continuity",
    "blowup",
    "all",
];

struct Setup {
    grid: Arc<TorusGrid>,
    params: PhysicalParams,
    basis: NoiseBasis,
}

fn setup(cfg: &SuiteConfig, n: usize) -> Result<Setup> {
    let grid = TorusGrid::new(n, cfg.length)?;
    let params = PhysicalParams::new(&grid, cfg.params)?;
    let basis = cfg.basis.build(&grid)?;
    Ok(Setup {
        grid,
        params,
        basis,
    })
}

fn with_refinement(
    cfg: &SuiteConfig,
    run: impl Fn(&Setup) -> Result<Vec<EstimateReport>>,
) -> Result<Vec<EstimateReport>> {
    let primary_n = *cfg
        .resolutions
        .first()
        .ok_or_else(|| invalid("resolutions", "must not be empty"))?;
    let mut reports = run(&setup(cfg, primary_n)?)?;
    for &n in &cfg.resolutions[1..] {
        let refined = run(&setup(cfg, n)?)?;
        for (r, f) in reports.iter_mut().zip(&refined) {
            r.attach_resolution(f);
        }
    }
    Ok(reports)
}

fn advective_suite(cfg: &SuiteConfig) -> Result<Vec<EstimateReport>> {
    with_refinement(cfg, |s| {
        let mut spec = cfg.samples.clone();
        spec.count *= 2;
        let states = sample_states(&s.grid, &spec)?;
        let pairs: Vec<(State, State)> = states
            .chunks(2)
            .map(|c| (c[0].clone(), c[1].clone()))
            .collect();
        Ok(vec![
            check_advective_estimate(&pairs, &s.params, 0, cfg.zeta[0], cfg.cutoff, cfg.margin)?,
            check_advective_estimate(&pairs, &s.params, 1, cfg.zeta[1], cfg.cutoff, cfg.margin)?,
        ])
    })
}

fn growth_suite(cfg: &SuiteConfig) -> Result<Vec<EstimateReport>> {
    with_refinement(cfg, |s| {
        let states = sample_states(&s.grid, &cfg.samples)?;
        let [a, b] = check_nonlinear_growth(&states, &s.params, cfg.margin)?;
        let [c, d] = check_truncated_l2(&states, &s.params, cfg.cutoff, cfg.margin)?;
        Ok(vec![a, b, c, d])
    })
}

fn envelope_ic(grid: &Arc<TorusGrid>, env: &EnvelopeSuite, norm: f64) -> Result<State> {
    let s = random_state(
        grid,
        &RandomSpec {
            seed: env.seed,
            kmax: 4,
            decay: 2.0,
            h_weight: env.h_weight,
        },
    )?;
    Ok(s.scaled(norm / s.norm12()))
}

/// Deterministic run at the stability-rule step.
pub fn deterministic_run(
    initial: &State,
    params: &PhysicalParams,
    t_final: f64,
) -> Result<TrajectoryRecord> {
    let empty = NoiseBasis::empty(initial.grid());
    let (d, _) = stable_dt(initial, params, &empty, Scheme::EmIto)?;
    let dt = t_final / (t_final / d).ceil();
    let mut ic = IntegrationConfig::new(Scheme::EmIto, t_final, dt);
    ic.store_every = 0;
    let path = NoisePath::zero(0, dt, ic.steps());
    integrate(
        initial,
        Model {
            params,
            basis: &empty,
            cutoff: None,
        },
        &path,
        &ic,
    )
}

fn envelope_suite(cfg: &SuiteConfig) -> Result<Vec<EstimateReport>> {
    let env = &cfg.envelope;
    with_refinement(cfg, |s| {
        let mut out = Vec::new();
        for (i, &norm) in env.norms.iter().enumerate() {
            let a0 = envelope_ic(&s.grid, env, norm)?;
            let rec = deterministic_run(&a0, &s.params, env.t_final)?;
            let (mut rep, envl) = check_energy_envelope(&rec, cfg.margin)?;
            rep.id = format!("envelope_{i}");
            rep.notes.push(format!("norm12_0={norm}"));
            let decays = envl.data[0] < envl.fixed_point;
            if decays {
                let g = post_transient_growth(&envl.data, env.transient);
                let mut mono = EstimateReport::new(&format!("small_data_decay_{i}"), s.grid.n());
                mono.samples = envl.data.len();
                mono.worst_ratio = g;
                mono.notes.push(format!(
                    "max q(k+1)/q(k) after {:.0}% transient; final/initial {:.4}",
                    100.0 * env.transient,
                    envl.data.last().unwrap() / envl.data[0]
                ));
                out.push(rep);
                out.push(mono.finish());
            } else {
                out.push(rep);
            }
        }
        let mut spec = cfg.samples.clone();
        spec.count = env.states;
        spec.seed ^= 0x5eed;
        let states = sample_states(&s.grid, &spec)?;
        let q_bound = spec.norm_max * spec.norm_max;
        let [d, g] = check_drift_diffusion(
            &states,
            &s.params,
            &s.basis,
            Some(cfg.cutoff),
            q_bound,
            cfg.margin,
        )?;
        out.push(d);
        out.push(g);
        Ok(out)
    })
}

/// Unit-norm perturbation direction: a single low `v` mode.
pub fn continuity_direction(grid: &Arc<TorusGrid>) -> State {
    let mut phi = State::zeros(grid);
    phi.v.x = ScalarField::from_fn(grid, |_, y| y.sin());
    phi.v.y = ScalarField::from_fn(grid, |x, _| (x).cos());
    let n = phi.energy12().sqrt();
    phi.scaled(1.0 / n)
}

fn continuity_suite(cfg: &SuiteConfig) -> Result<Vec<EstimateReport>> {
    let s = setup(cfg, cfg.resolutions[0])?;
    let c = &cfg.continuity;
    let a0 = envelope_ic(
        &s.grid,
        &EnvelopeSuite {
            seed: c.seed,
            ..cfg.envelope.clone()
        },
        c.norm12_0,
    )?;
    let phi = continuity_direction(&s.grid);
    let res = check_continuity_in_ic(&a0, &phi, &s.params, &s.basis, &c.study)?;
    Ok(vec![res.report])
}

fn blowup_suite(cfg: &SuiteConfig) -> Result<Vec<EstimateReport>> {
    let s = setup(cfg, cfg.resolutions[0])?;
    let dir = envelope_ic(&s.grid, &cfg.envelope, 1.0)?;
    let est = blowup_probability(&dir, &s.params, &s.basis, &cfg.blowup)?;
    let mut rep = EstimateReport::new("staying_probability", s.grid.n());
    rep.paths = cfg.blowup.paths;
    let mut worst: f64 = 0.0;
    for e in &est {
        rep.constants
            .insert(format!("p_hat[{:.4}]", e.norm12_0), e.probability);
        rep.notes.push(format!(
            "norm12_0={:.4} q0/C={:.4}: {}/{} stay, CI [{:.4}, {:.4}], bound {:.4}",
            e.norm12_0, e.relative_energy, e.staying, e.paths, e.ci_low, e.ci_high, e.lower_bound
        ));
        // the Monte Carlo estimate should not fall below the lower bound
        let ratio = if e.ci_high > 0.0 {
            e.lower_bound / e.ci_high
        } else if e.lower_bound > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        worst = worst.max(ratio);
    }
    if !staying_monotone(&est) {
        worst = f64::INFINITY;
        rep.notes
            .push("staying probability not monotone in the initial norm".into());
    }
    rep.worst_ratio = worst;
    Ok(vec![rep.finish()])
}

/// Runs a named suite: `advective`, `growth`, `envelope`, `continuity`,
/// `blowup` or `all` (everything except `blowup`).
pub fn run_suite(name: &str, cfg: &SuiteConfig) -> Result<Vec<EstimateReport>> {
    match name {
        "advective" => advective_suite(cfg),
        "growth" => growth_suite(cfg),
        "envelope" => envelope_suite(cfg),
        "continuity" => continuity_suite(cfg),
        "blowup" => blowup_suite(cfg),
        "all" => {
            let mut out = advective_suite(cfg)?;
            out.extend(growth_suite(cfg)?);
            out.extend(envelope_suite(cfg)?);
            out.extend(continuity_suite(cfg)?);
            Ok(out)
        }
        other => Err(invalid(
            "suite",
            format!(
                "unknown suite '{other}' (expected one of {})",
                SUITES.join(", ")
            ),
        )),
    }
}
