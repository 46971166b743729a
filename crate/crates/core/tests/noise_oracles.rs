mod common;

use common::*;
use srsw_core::noise::{lie_transport, momentum_stretch, NoiseBasis, NoisePath, Phase};
use srsw_core::physics::State;
use srsw_core::spectral::{derivative, inner_product, Axis, ScalarField, VectorField};

#[test]
fn w4_inf_summability_matches_per_mode_closed_form() {
    let g = grid(64);
    let b = NoiseBasis::default_basis(&g, 8, 0.05, 3.0).unwrap();
    let mut expected = 0.0;
    for m in b.modes() {
        let kn = ((m.k1 * m.k1 + m.k2 * m.k2) as f64).sqrt();
        let dirs = [m.k2 as f64 / kn, m.k1 as f64 / kn];
        let mut best: f64 = 0.0;
        for d in dirs {
            for total in 0..=4 {
                for a in 0..=total {
                    let w = (m.k1 as f64).abs().powi(a) * (m.k2 as f64).abs().powi(total - a);
                    best = best.max(m.amplitude * d.abs() * w);
                }
            }
        }
        expected += best * best;
    }
    let got = b.summability();
    assert!(
        (got - expected).abs() < 1e-8 * expected,
        "{got} vs {expected}"
    );
    assert_eq!(b.len(), 8);
    assert!(b.max_divergence() < 1e-12);
    assert!(b.modes().iter().filter(|m| m.phase == Phase::Cos).count() == 4);
}

#[test]
fn transport_matches_finite_difference_advection() {
    let g = grid(256);
    let b = NoiseBasis::default_basis(&g, 6, 0.3, 1.0).unwrap();
    let f = smooth_state(&g, 5, 3, 1.0).h;
    for xi in b.fields() {
        let grad = fd_grad(&f);
        let oracle = &mul(&xi.x, &grad.x) + &mul(&xi.y, &grad.y);
        assert!(max_diff(&lie_transport(xi, &f).unwrap(), &oracle) < 1e-6);
    }
}

#[test]
fn stretch_matches_pointwise_oracle() {
    let g = grid(64);
    let b = basis(&g);
    let v = smooth_state(&g, 6, 4, 1.0).v;
    for xi in b.fields() {
        let d = |f: &ScalarField, ax| derivative(f, ax, 1).unwrap();
        let ox = &mul(&v.x, &d(&xi.x, Axis::X)) + &mul(&v.y, &d(&xi.y, Axis::X));
        let oy = &mul(&v.x, &d(&xi.x, Axis::Y)) + &mul(&v.y, &d(&xi.y, Axis::Y));
        let got = momentum_stretch(xi, &v).unwrap();
        assert!(max_diff(&got.x, &ox) < 1e-12);
        assert!(max_diff(&got.y, &oy) < 1e-12);
    }
}

#[test]
fn g_op_is_linear_and_correction_composes() {
    let g = grid(64);
    let b = basis(&g);
    let a = smooth_state(&g, 7, 4, 1.0);
    let c = smooth_state(&g, 8, 4, 0.7);
    let mut sum = a.clone();
    sum.axpy(1.0, &c);
    for i in 0..b.len() {
        let mut lin = b.g_op(i, &a).unwrap();
        lin.axpy(1.0, &b.g_op(i, &c).unwrap());
        assert!(state_max_diff(&b.g_op(i, &sum).unwrap(), &lin) < 1e-12);
    }
    let mut oracle = State::zeros(&g);
    for i in 0..b.len() {
        oracle.axpy(0.5, &b.g_op(i, &b.g_op(i, &a).unwrap()).unwrap());
    }
    let corr = b.ito_correction(&a).unwrap();
    assert!(state_max_diff(&corr, &oracle) < 1e-10);
    // linear in the state
    let scaled = b.ito_correction(&a.scaled(3.0)).unwrap();
    assert!(state_max_diff(&scaled, &corr.scaled(3.0)) < 1e-12);
}

#[test]
fn height_components_keep_zero_mean() {
    let g = grid(64);
    let b = basis(&g);
    let mut a = smooth_state(&g, 9, 4, 1.0);
    a.h = a.h.map(|x| x + 2.0);
    for gi in b.g_all(&a).unwrap() {
        assert!(gi.h.mean().abs() < 1e-12);
    }
    assert!(b.ito_correction(&a).unwrap().h.mean().abs() < 1e-12);
}

#[test]
fn transport_is_skew_for_every_mode() {
    let g = grid(64);
    let b = basis(&g);
    for seed in 0..50 {
        let f = smooth_state(&g, 100 + seed, 8, 1.0).h;
        let ff = inner_product(&f, &f).unwrap();
        for xi in b.fields() {
            let s = inner_product(&f, &lie_transport(xi, &f).unwrap()).unwrap();
            assert!(s.abs() <= 1e-10 * ff);
        }
    }
}

#[test]
fn increments_have_mean_zero_and_variance_dt() {
    let dt = 0.01;
    let m = 100_000;
    let path = NoisePath::sample(2, dt, m, 123).unwrap();
    for i in 0..2 {
        let x = path.mode_increments(i);
        let mean = x.iter().sum::<f64>() / m as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
        let se_mean = (dt / m as f64).sqrt();
        // Var(s²) = 2σ⁴/(m−1) for Gaussian samples
        let se_var = dt * (2.0 / (m - 1) as f64).sqrt();
        assert!(mean.abs() < 4.0 * se_mean, "mean {mean}");
        assert!((var - dt).abs() < 4.0 * se_var, "var {var}");
    }
    let again = NoisePath::sample(2, dt, m, 123).unwrap();
    assert_eq!(path, again);
    assert_ne!(path.mode_increments(0), path.mode_increments(1));
}

#[test]
fn constant_field_transport_is_a_derivative() {
    let g = grid(32);
    let xi = VectorField::new(
        ScalarField::constant(&g, 0.0),
        ScalarField::constant(&g, 2.0),
    )
    .unwrap();
    let f = smooth_state(&g, 1, 4, 1.0).h;
    let dy = derivative(&f, Axis::Y, 1).unwrap().scaled(2.0);
    assert!(max_diff(&lie_transport(&xi, &f).unwrap(), &dy) < 1e-12);
}
