mod common;

use common::*;
use srsw_core::noise::{NoiseBasis, NoisePath};
use srsw_core::physics::{mass, State};
use srsw_core::spectral::ScalarField;
use srsw_core::stepper::{integrate, IntegrationConfig, Model, Monitors, Scheme};

fn single_mode_h(n: usize, k: f64, amp: f64) -> State {
    let g = grid(n);
    let mut s = State::zeros(&g);
    s.h = ScalarField::from_fn(&g, |x, _| amp * (k * x).sin());
    s
}

/// `h` error at `t` against the exact heat decay with nonlinear terms cut off.
fn diffusion_error(scheme: Scheme, dt: f64, t: f64) -> f64 {
    let a0 = single_mode_h(32, 2.0, 2.0);
    let g = a0.grid().clone();
    let p = params(&g);
    let b = NoiseBasis::empty(&g);
    // ‖a‖_{1,2} stays far above R + 1, so f_R = 0 throughout
    let model = Model {
        params: &p,
        basis: &b,
        cutoff: Some(1e-3),
    };
    let mut c = IntegrationConfig::new(scheme, t, dt);
    c.store_every = 0;
    let rec = integrate(&a0, model, &NoisePath::zero(0, dt, c.steps()), &c).unwrap();
    assert!(rec.fr.iter().all(|f| *f == 0.0));
    let exact = a0.h.scaled((-p.eta * 4.0 * t).exp());
    max_diff(&rec.final_state().unwrap().h, &exact)
}

#[test]
fn heun_is_second_order_on_single_mode_diffusion() {
    let errs: Vec<f64> = [0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| diffusion_error(Scheme::HeunStrat, dt, 1.0))
        .collect();
    let slope = refinement_slope(&errs);
    assert!(
        (1.9..=2.1).contains(&slope),
        "slope {slope}, errors {errs:?}"
    );
    let em: Vec<f64> = [0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| diffusion_error(Scheme::EmIto, dt, 1.0))
        .collect();
    let slope = refinement_slope(&em);
    assert!((0.9..=1.1).contains(&slope), "EM slope {slope}");
}

#[test]
fn strong_self_convergence_against_refined_reference() {
    let g = grid(32);
    let p = params(&g);
    let b = NoiseBasis::default_basis(&g, 8, 0.1, 3.0).unwrap();
    let a0 = smooth_state(&g, 21, 4, 0.5);
    let t = 0.5;
    let base = dividing_dt(t, &a0, &p, &b, Scheme::EmIto);
    let fine_factor = 16;
    let fine = NoisePath::for_basis(
        &b,
        base / fine_factor as f64,
        (t / base).round() as usize * fine_factor,
        5,
    )
    .unwrap();
    let model = Model {
        params: &p,
        basis: &b,
        cutoff: None,
    };
    let run = |factor: usize| {
        let path = fine.coarsen(factor).unwrap();
        let mut c = IntegrationConfig::new(Scheme::EmIto, t, path.dt);
        c.store_every = 0;
        integrate(&a0, model, &path, &c)
            .unwrap()
            .final_state()
            .unwrap()
            .clone()
    };
    // each level against its own dt/2 refinement
    let states: Vec<State> = [16, 8, 4, 2].iter().map(|&f| run(f)).collect();
    let errs: Vec<f64> = states
        .windows(2)
        .map(|w| w[0].difference(&w[1]).l2_norm())
        .collect();
    let slope = refinement_slope(&errs);
    assert!(
        (0.4..=1.1).contains(&slope),
        "slope {slope}, errors {errs:?}"
    );
}

#[test]
fn mass_is_conserved_along_noisy_runs() {
    let g = grid(32);
    let p = params(&g);
    let b = basis(&g);
    let mut a0 = smooth_state(&g, 22, 4, 0.5);
    a0.h = a0.h.map(|x| x + 1.0);
    let m0 = mass(&a0);
    for scheme in [Scheme::EmIto, Scheme::HeunStrat, Scheme::EmItoIf] {
        let dt = 0.01;
        let mut c = IntegrationConfig::new(scheme, 1000.0 * dt, dt);
        c.store_every = 0;
        let path = NoisePath::for_basis(&b, dt, c.steps(), 9).unwrap();
        let rec = integrate(
            &a0,
            Model {
                params: &p,
                basis: &b,
                cutoff: Some(2.0),
            },
            &path,
            &c,
        )
        .unwrap();
        assert!(!rec.blown_up);
        assert_eq!(rec.len(), 1001);
        let drift = rec.mass.iter().map(|m| (m - m0).abs()).fold(0.0, f64::max) / m0.abs();
        assert!(drift < 1e-10, "{scheme:?}: {drift}");
    }
}

#[test]
fn rest_state_with_topography_and_rotation_is_fixed() {
    let g = grid(32);
    let b = NoiseBasis::empty(&g);
    let bottom = ScalarField::constant(&g, 0.7);
    let mut rot = srsw_core::spectral::VectorField::zeros(&g);
    rot.x = ScalarField::constant(&g, 0.2);
    rot.y = ScalarField::constant(&g, -0.4);
    let p = params(&g)
        .with_topography(bottom.clone())
        .unwrap()
        .with_rotation(rot.clone())
        .unwrap();
    let rest = State::new(rot, bottom).unwrap();
    for scheme in [Scheme::EmIto, Scheme::HeunStrat] {
        let dt = 0.01;
        let mut c = IntegrationConfig::new(scheme, 1000.0 * dt, dt);
        c.store_every = 0;
        let rec = integrate(
            &rest,
            Model {
                params: &p,
                basis: &b,
                cutoff: None,
            },
            &NoisePath::zero(0, dt, c.steps()),
            &c,
        )
        .unwrap();
        assert!(state_max_diff(rec.final_state().unwrap(), &rest) < 1e-12);
    }
}

#[test]
fn small_data_decays_deterministically() {
    let g = grid(64);
    let p = params(&g);
    let b = NoiseBasis::empty(&g);
    let a0 = smooth_state(&g, 23, 4, 1e-3);
    let dt = dividing_dt(1.0, &a0, &p, &b, Scheme::EmIto);
    let mut c = IntegrationConfig::new(Scheme::EmIto, 1.0, dt);
    c.store_every = 0;
    let rec = integrate(
        &a0,
        Model {
            params: &p,
            basis: &b,
            cutoff: None,
        },
        &NoisePath::zero(0, dt, c.steps()),
        &c,
    )
    .unwrap();
    assert!(rec.norm12.last().unwrap() < &rec.norm12[0]);
}

#[test]
fn monitors_record_hits_and_ordering() {
    let g = grid(32);
    let p = params(&g);
    let b = basis(&g);
    let a0 = smooth_state(&g, 24, 4, 1.5);
    let mut c = IntegrationConfig::new(Scheme::EmIto, 0.5, 0.01);
    c.monitors = Monitors {
        r_levels: vec![1.0, 1.4, 1.5000001],
        m_levels: vec![1.0, 1.4],
        ..Monitors::default()
    };
    let path = NoisePath::for_basis(&b, 0.01, c.steps(), 3).unwrap();
    let rec = integrate(
        &a0,
        Model {
            params: &p,
            basis: &b,
            cutoff: None,
        },
        &path,
        &c,
    )
    .unwrap();
    // ‖a₀‖ > R: τ^R = 0
    assert_eq!(rec.tau_r[0].time, Some(0.0));
    assert_eq!(rec.tau_r[1].time, Some(0.0));
    assert!(rec.t22.windows(2).all(|w| w[1] >= w[0]));
    for (hr, hm) in rec.tau_r.iter().zip(&rec.tau_hat_m) {
        if let (Some(tr), Some(tm)) = (hr.time, hm.time) {
            assert!(tm <= tr);
        }
    }
    // first hit: the norm reaches R at that step and not before
    for h in &rec.tau_r {
        if let Some(t) = h.time {
            let k = (t / c.dt).round() as usize;
            assert!(rec.norm12[k] >= h.level);
            assert!(rec.norm12[..k].iter().all(|x| *x < h.level));
        }
    }
}

#[test]
fn truncated_and_untruncated_runs_agree_inside_the_ball() {
    let g = grid(32);
    let p = params(&g);
    let b = basis(&g);
    let a0 = smooth_state(&g, 25, 4, 0.3);
    let mut c = IntegrationConfig::new(Scheme::HeunStrat, 0.5, 0.01);
    c.store_every = 0;
    let path = NoisePath::for_basis(&b, 0.01, c.steps(), 4).unwrap();
    let free = integrate(
        &a0,
        Model {
            params: &p,
            basis: &b,
            cutoff: None,
        },
        &path,
        &c,
    )
    .unwrap();
    let r = 2.0 * free.norm12.iter().cloned().fold(0.0, f64::max);
    let cut = integrate(
        &a0,
        Model {
            params: &p,
            basis: &b,
            cutoff: Some(r),
        },
        &path,
        &c,
    )
    .unwrap();
    assert_eq!(
        free.norms_csv().replace("fR_value", ""),
        cut.norms_csv().replace("fR_value", "")
    );
    let same = free
        .final_state()
        .unwrap()
        .components()
        .iter()
        .zip(cut.final_state().unwrap().components())
        .all(|(x, y)| {
            x.values()
                .iter()
                .zip(y.values())
                .all(|(p, q)| p.to_bits() == q.to_bits())
        });
    assert!(same);
}
