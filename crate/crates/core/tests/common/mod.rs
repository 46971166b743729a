#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use srsw_core::initial::{random_state, RandomSpec};
use srsw_core::noise::NoiseBasis;
use srsw_core::physics::{ParamValues, PhysicalParams, State};
use srsw_core::spectral::{ScalarField, TorusGrid, VectorField};
use srsw_core::stepper::{stable_dt, Scheme};

pub fn grid(n: usize) -> Arc<TorusGrid> {
    TorusGrid::new(n, 2.0 * PI).unwrap()
}

pub fn params(g: &Arc<TorusGrid>) -> PhysicalParams {
    PhysicalParams::new(g, ParamValues::default()).unwrap()
}

pub fn basis(g: &Arc<TorusGrid>) -> NoiseBasis {
    NoiseBasis::default_basis(g, 8, 0.05, 3.0).unwrap()
}

/// Unstructured grid values, uniform in `[-1, 1]`.
pub fn noise_field(g: &Arc<TorusGrid>, rng: &mut ChaCha8Rng) -> ScalarField {
    let vals = (0..g.n() * g.n())
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    ScalarField::from_values(g, vals).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Smooth band-limited state rescaled to `‖a‖_{1,2} = norm`.
pub fn smooth_state(g: &Arc<TorusGrid>, seed: u64, kmax: i32, norm: f64) -> State {
    let s = random_state(
        g,
        &RandomSpec {
            seed,
            kmax,
            decay: 2.0,
            h_weight: 0.5,
        },
    )
    .unwrap();
    s.scaled(norm / s.norm12())
}

/// Largest step allowed by the stability rule that divides `t`.
pub fn dividing_dt(
    t: f64,
    state: &State,
    p: &PhysicalParams,
    b: &NoiseBasis,
    scheme: Scheme,
) -> f64 {
    let (dt, _) = stable_dt(state, p, b, scheme).unwrap();
    t / (t / dt.min(t)).ceil()
}

/// Fourth-order centred difference along x (`axis = 0`) or y (`axis = 1`).
pub fn fd4(f: &ScalarField, axis: usize) -> ScalarField {
    let n = f.grid().n();
    let h = f.grid().spacing();
    let v = f.values();
    let at = |i: isize, j: isize| {
        let i = i.rem_euclid(n as isize) as usize;
        let j = j.rem_euclid(n as isize) as usize;
        v[j * n + i]
    };
    let mut out = vec![0.0; n * n];
    for j in 0..n as isize {
        for i in 0..n as isize {
            let (di, dj) = if axis == 0 { (1, 0) } else { (0, 1) };
            let d = -at(i + 2 * di, j + 2 * dj) + 8.0 * at(i + di, j + dj)
                - 8.0 * at(i - di, j - dj)
                + at(i - 2 * di, j - 2 * dj);
            out[j as usize * n + i as usize] = d / (12.0 * h);
        }
    }
    ScalarField::from_values(f.grid(), out).unwrap()
}

pub fn fd_grad(f: &ScalarField) -> VectorField {
    VectorField::new(fd4(f, 0), fd4(f, 1)).unwrap()
}

pub fn fd_lap(f: &ScalarField) -> ScalarField {
    &fd4(&fd4(f, 0), 0) + &fd4(&fd4(f, 1), 1)
}

pub fn mul(a: &ScalarField, b: &ScalarField) -> ScalarField {
    a.zip_with(b, |x, y| x * y).unwrap()
}

pub fn max_diff(a: &ScalarField, b: &ScalarField) -> f64 {
    (a - b).max_abs()
}

pub fn state_max_diff(a: &State, b: &State) -> f64 {
    a.difference(b).max_abs()
}

/// Least-squares slope of `log2(err)` against refinement level.
pub fn refinement_slope(errors: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = errors
        .iter()
        .enumerate()
        .map(|(i, e)| (i as f64, -e.log2()))
        .collect();
    srsw_core::verify::linear_fit(&pts).1
}
