mod common;

use common::*;
use srsw_core::spectral::{
    dealias, derivative, inner_product, laplacian, sobolev_norm, sobolev_norm_sq, Axis, ScalarField,
};
use srsw_core::verify::{multi_index_inner, multi_indices};

#[test]
fn derivative_of_exp_sin_matches_finite_differences() {
    let g = grid(256);
    let f = ScalarField::from_fn(&g, |x, _| x.sin().exp());
    let spectral = derivative(&f, Axis::X, 1).unwrap();
    assert!(max_diff(&spectral, &fd4(&f, 0)) < 1e-6);
    let exact = ScalarField::from_fn(&g, |x, _| x.cos() * x.sin().exp());
    assert!(max_diff(&spectral, &exact) < 1e-12);
}

#[test]
fn derivatives_exact_on_resolved_trig_modes() {
    let g = grid(64);
    for (k1, k2) in [(1.0, 0.0), (3.0, -2.0), (7.0, 5.0), (0.0, 21.0)] {
        let f = ScalarField::from_fn(&g, |x, y| (k1 * x + k2 * y).sin());
        let fx = ScalarField::from_fn(&g, |x, y| k1 * (k1 * x + k2 * y).cos());
        let fyy = ScalarField::from_fn(&g, |x, y| -k2 * k2 * (k1 * x + k2 * y).sin());
        let lap = ScalarField::from_fn(&g, |x, y| -(k1 * k1 + k2 * k2) * (k1 * x + k2 * y).sin());
        let scale = 1.0 + k1 * k1 + k2 * k2;
        assert!(max_diff(&derivative(&f, Axis::X, 1).unwrap(), &fx) < 1e-12 * scale);
        assert!(max_diff(&derivative(&f, Axis::Y, 2).unwrap(), &fyy) < 1e-12 * scale);
        assert!(max_diff(&laplacian(&f), &lap) < 1e-12 * scale);
    }
}

#[test]
fn inner_product_matches_double_sum_quadrature() {
    let g = grid(32);
    let mut r = rng(1);
    let f = noise_field(&g, &mut r);
    let h = noise_field(&g, &mut r);
    let dx = g.spacing();
    let mut direct = 0.0;
    for j in 0..32 {
        for i in 0..32 {
            direct += f.values()[j * 32 + i] * h.values()[j * 32 + i] * dx * dx;
        }
    }
    let got = inner_product(&f, &h).unwrap();
    assert!((got - direct).abs() <= 1e-10 * direct.abs().max(1.0));
}

#[test]
fn parseval_and_integration_by_parts_over_random_fields() {
    let g = grid(32);
    let mut r = rng(2);
    for _ in 0..100 {
        let f = noise_field(&g, &mut r);
        let h = noise_field(&g, &mut r);
        let physical = inner_product(&f, &f).unwrap();
        let spectral = sobolev_norm_sq(&f, 0).unwrap();
        assert!((physical - spectral).abs() <= 1e-10 * physical);

        let lhs = inner_product(&derivative(&f, Axis::X, 1).unwrap(), &h).unwrap();
        let rhs = -inner_product(&f, &derivative(&h, Axis::X, 1).unwrap()).unwrap();
        let scale = inner_product(
            &derivative(&f, Axis::X, 1).unwrap(),
            &derivative(&f, Axis::X, 1).unwrap(),
        )
        .unwrap()
        .sqrt()
            * physical.sqrt();
        assert!((lhs - rhs).abs() <= 1e-10 * scale, "{lhs} vs {rhs}");
    }
}

#[test]
fn derivative_outputs_have_zero_mean() {
    let g = grid(32);
    let mut r = rng(3);
    for _ in 0..10 {
        let f = noise_field(&g, &mut r).map(|x| x + 5.0);
        assert!(laplacian(&f).mean().abs() < 1e-12);
        assert!(derivative(&f, Axis::Y, 1).unwrap().mean().abs() < 1e-12);
        assert!(derivative(&f, Axis::X, 3).unwrap().mean().abs() < 1e-12);
    }
}

#[test]
fn w22_norm_brackets_the_multi_index_sum() {
    let g = grid(64);
    for seed in 0..5 {
        let f = smooth_state(&g, seed, 6, 1.0).h;
        let weighted = sobolev_norm_sq(&f, 2).unwrap();
        // brute force: Σ_{|α|≤2} ‖∂^α f‖² with ∂^α computed by repeated derivatives
        let mut brute = 0.0;
        for (a1, a2) in multi_indices(2) {
            let mut d = f.clone();
            if a1 > 0 {
                d = derivative(&d, Axis::X, a1).unwrap();
            }
            if a2 > 0 {
                d = derivative(&d, Axis::Y, a2).unwrap();
            }
            brute += inner_product(&d, &d).unwrap();
            // the spectral pairing agrees with the physical one
            let pairing = multi_index_inner(&f, &f, (a1, a2)).unwrap();
            assert!((pairing - inner_product(&d, &d).unwrap()).abs() < 1e-10 * pairing.max(1e-300));
        }
        let ratio = weighted / brute;
        assert!((1.0..=2.0).contains(&ratio), "ratio {ratio}");
        // (1+|κ|²)² Parseval sum, assembled independently on the grid
        let lap = laplacian(&f);
        let fx = derivative(&f, Axis::X, 1).unwrap();
        let fy = derivative(&f, Axis::Y, 1).unwrap();
        let direct = inner_product(&f, &f).unwrap()
            + 2.0 * (inner_product(&fx, &fx).unwrap() + inner_product(&fy, &fy).unwrap())
            + inner_product(&lap, &lap).unwrap();
        assert!((weighted - direct).abs() <= 1e-10 * direct);
    }
}

#[test]
fn sobolev_norms_are_ordered() {
    let g = grid(32);
    let mut r = rng(4);
    for _ in 0..20 {
        let f = noise_field(&g, &mut r);
        let n0 = sobolev_norm(&[&f], 0).unwrap();
        let n1 = sobolev_norm(&[&f], 1).unwrap();
        let n2 = sobolev_norm(&[&f], 2).unwrap();
        assert!(n0 <= n1 && n1 <= n2);
    }
    assert!(sobolev_norm(&[&noise_field(&g, &mut r)], 3).is_err());
}

#[test]
fn dealiased_product_has_no_energy_above_the_band() {
    let n = 64;
    let g = grid(n);
    let k = (n / 2 - 1) as f64;
    let s = ScalarField::from_fn(&g, |x, _| (k * x).sin());
    let p = dealias(&mul(&s, &s));
    let spec = p.spectrum();
    for (idx, c) in spec.coefficients().iter().enumerate() {
        let (k1, k2) = g.wavenumber_at(idx);
        if 3 * k1.abs().max(k2.abs()) > n as i64 {
            // re-transforming leaves only roundoff (coefficients scale like n²)
            assert!(c.norm() < 1e-14 * (n * n) as f64);
        }
    }
    assert!((p.mean() - 0.5).abs() < 1e-12);
}
