//! Picard iteration for the truncated system: iterate `n` solves the linear
//! SPDE whose advective terms are frozen at iterate `n − 1`.
//!
//! All iterates share one noise path, so the fixed point is the direct
//! truncated Euler–Maruyama trajectory on that path.

use std::fmt::Write as _;

use serde::Serialize;

use crate::dynamics::{self, truncation_factor, Tendency};
use crate::error::{invalid, Result, SrswError};
use crate::noise::NoisePath;
use crate::physics::State;
use crate::stepper::{
    self, em_update, integrate_with, IntegrationConfig, Model, Scheme, TrajectoryRecord,
};

#[derive(Debug, Clone)]
pub struct PicardConfig {
    pub integration: IntegrationConfig,
    pub tol: f64,
    pub max_iter: usize,
    /// Fractional time regularity `α ∈ [0, ½)`.
    pub alpha: f64,
    /// Integrability `p > 2`.
    pub p: f64,
}

impl PicardConfig {
    pub fn new(integration: IntegrationConfig, tol: f64, max_iter: usize) -> Self {
        Self {
            integration,
            tol,
            max_iter,
            alpha: 0.25,
            p: 4.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(invalid(
                "tol",
                format!("must be positive, got {}", self.tol),
            ));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        check_frac_params(self.alpha, self.p)
    }
}

#[derive(Debug, Clone)]
pub struct IterateRecord {
    pub index: usize,
    pub record: TrajectoryRecord,
    /// `sup_t ‖aⁿ_t − aⁿ⁻¹_t‖_{L²}`.
    pub distance: f64,
    /// `‖aⁿ‖_{T,2,2}`.
    pub t22: f64,
    /// `‖aⁿ‖^p_{W^{α,p}(0,T;L²)}`.
    pub frac_norm: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct IterateSummary {
    pub n: usize,
    pub distance: f64,
    pub t22: f64,
    pub frac_norm: f64,
}

impl IterateRecord {
    pub fn summary(&self) -> IterateSummary {
        IterateSummary {
            n: self.index,
            distance: self.distance,
            t22: self.t22,
            frac_norm: self.frac_norm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PicardOutcome {
    pub iterates: Vec<IterateRecord>,
    pub converged: bool,
    /// Set when an iterate blew up.
    pub failure: Option<String>,
    /// `sup_t ‖limit − direct‖_{L²}` against the direct truncated solve.
    pub direct_residual: f64,
}

impl PicardOutcome {
    pub fn limit(&self) -> &TrajectoryRecord {
        &self.iterates.last().expect("at least one iterate").record
    }

    pub fn distances(&self) -> Vec<f64> {
        self.iterates.iter().map(|it| it.distance).collect()
    }

    /// Per-iterate CSV with columns `n,sup_l2_distance,t22,frac_norm`.
    pub fn iterates_csv(&self) -> String {
        let mut out = String::from("n,sup_l2_distance,t22,frac_norm\n");
        for it in &self.iterates {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                it.index, it.distance, it.t22, it.frac_norm
            );
        }
        out
    }
}

fn single_step_config(config: &IntegrationConfig) -> IntegrationConfig {
    let mut c = config.clone();
    c.scheme = Scheme::EmIto;
    c.store_every = 1;
    c
}

/// Integrates `da = [L(a) + F_k] dt − Σ 𝒢ᵢ(a) dWᵢ` by Euler–Maruyama, with
/// the forcing `F_k` supplied per step.
pub fn solve_linear<F>(
    initial: &State,
    model: Model<'_>,
    path: &NoisePath,
    config: &IntegrationConfig,
    mut forcing: F,
) -> Result<TrajectoryRecord>
where
    F: FnMut(usize) -> Result<Option<Tendency>>,
{
    let cfg = IntegrationConfig {
        cutoff: model.cutoff,
        ..single_step_config(config)
    };
    integrate_with(
        initial,
        &cfg,
        |state, k| {
            let mut rhs = dynamics::linear_drift(state, model.params)?;
            if let Some(f) = forcing(k)? {
                rhs.axpy(1.0, &f);
            }
            em_update(state, rhs, model.basis, cfg.dt, &path.increments_at(k))
        },
        Some((model, path)),
    )
}

/// Frozen forcing `f_R(‖aⁿ⁻¹‖_{1,2}) · N(aⁿ⁻¹)` at step `k`.
fn frozen_forcing(prev: &TrajectoryRecord, model: Model<'_>, k: usize) -> Result<Option<Tendency>> {
    let a = prev.state_at_step(k).ok_or_else(|| {
        SrswError::TimeGridMismatch(format!("previous iterate has no state at step {k}"))
    })?;
    let factor = truncation_factor(a.norm12(), model.cutoff);
    if factor == 0.0 {
        return Ok(None);
    }
    Ok(Some(
        dynamics::nonlinear_drift(a, model.params)?.scaled(factor),
    ))
}

fn check_prev(prev: &TrajectoryRecord, config: &IntegrationConfig) -> Result<()> {
    let steps = config.steps();
    if prev.len() != steps + 1 || !prev.has_all_states() {
        return Err(SrswError::TimeGridMismatch(format!(
            "previous iterate has {} samples ({} states), run needs {}",
            prev.len(),
            prev.states.len(),
            steps + 1
        )));
    }
    if (prev.dt - config.dt).abs() > 1e-12 * config.dt {
        return Err(SrswError::TimeGridMismatch(format!(
            "previous iterate dt {} differs from {}",
            prev.dt, config.dt
        )));
    }
    Ok(())
}

/// One Picard iterate from the previous trajectory.
pub fn picard_step(
    prev: &TrajectoryRecord,
    initial: &State,
    model: Model<'_>,
    path: &NoisePath,
    config: &IntegrationConfig,
) -> Result<TrajectoryRecord> {
    check_prev(prev, config)?;
    solve_linear(initial, model, path, config, |k| {
        frozen_forcing(prev, model, k)
    })
}

/// The constant-in-time iterate 0.
pub fn constant_trajectory(
    initial: &State,
    config: &IntegrationConfig,
) -> Result<TrajectoryRecord> {
    let cfg = single_step_config(config);
    integrate_with(initial, &cfg, |s, _| Ok(s.clone()), None)
}

/// `sup_k ‖a_k − b_k‖_{L²}` over the common stored steps.
pub fn sup_l2_distance(a: &TrajectoryRecord, b: &TrajectoryRecord) -> Result<f64> {
    if a.len() != b.len() || !a.has_all_states() || !b.has_all_states() {
        return Err(SrswError::TimeGridMismatch(format!(
            "trajectories with {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    let mut sup: f64 = 0.0;
    for ((_, x), (_, y)) in a.states.iter().zip(&b.states) {
        sup = sup.max(x.difference(y).l2_norm());
    }
    Ok(sup)
}

pub fn picard_solve(
    initial: &State,
    model: Model<'_>,
    path: &NoisePath,
    config: &PicardConfig,
) -> Result<PicardOutcome> {
    config.validate()?;
    let int = &config.integration;
    let mut prev = constant_trajectory(initial, int)?;
    let mut iterates = Vec::new();
    let mut converged = false;
    let mut failure = None;
    for index in 1..=config.max_iter {
        let record = picard_step(&prev, initial, model, path, int)?;
        if record.blown_up {
            failure = Some(format!(
                "iterate {index}: {}",
                record.blowup_reason.clone().unwrap_or_default()
            ));
            let t22 = record.t22.last().copied().unwrap_or(f64::NAN);
            iterates.push(IterateRecord {
                index,
                record,
                distance: f64::INFINITY,
                t22,
                frac_norm: f64::NAN,
            });
            break;
        }
        let distance = sup_l2_distance(&record, &prev)?;
        let t22 = *record.t22.last().expect("non-empty record");
        let frac_norm = frac_sobolev_norm(&record, config.alpha, config.p)?;
        log::debug!("picard iterate {index}: distance {distance:e}");
        iterates.push(IterateRecord {
            index,
            record: record.clone(),
            distance,
            t22,
            frac_norm,
        });
        prev = record;
        if distance < config.tol {
            converged = true;
            break;
        }
    }
    let direct_residual = if failure.is_none() {
        let cfg = single_step_config(int);
        let direct = stepper::integrate(initial, model, path, &cfg)?;
        if direct.blown_up {
            f64::INFINITY
        } else {
            sup_l2_distance(&prev, &direct)?
        }
    } else {
        f64::INFINITY
    };
    Ok(PicardOutcome {
        iterates,
        converged,
        failure,
        direct_residual,
    })
}

fn check_frac_params(alpha: f64, p: f64) -> Result<()> {
    if !(0.0..0.5).contains(&alpha) {
        return Err(invalid(
            "alpha",
            format!("must lie in [0, 1/2), got {alpha}"),
        ));
    }
    if !(p > 2.0 && p.is_finite()) {
        return Err(invalid("p", format!("must lie in (2, inf), got {p}")));
    }
    Ok(())
}

/// Discrete `‖a‖^p_{W^{α,p}(0,T;L²)}`:
/// `Σ_{i≠j} ‖a_i − a_j‖ᵖ / |t_i − t_j|^{1+αp} wᵢwⱼ + Σ ‖a_i‖ᵖ wᵢ`
/// with trapezoid weights on uniformly spaced stored states.
pub fn frac_sobolev_norm(traj: &TrajectoryRecord, alpha: f64, p: f64) -> Result<f64> {
    check_frac_params(alpha, p)?;
    let states = &traj.states;
    if states.len() < 3 {
        return Err(SrswError::InsufficientData(format!(
            "{} stored states, need at least 3",
            states.len()
        )));
    }
    let times: Vec<f64> = states.iter().map(|(k, _)| traj.times[*k]).collect();
    let h = times[1] - times[0];
    if !(h > 0.0)
        || times
            .windows(2)
            .any(|w| ((w[1] - w[0]) - h).abs() > 1e-9 * h)
    {
        return Err(SrswError::TimeGridMismatch(
            "stored states are not uniformly spaced".into(),
        ));
    }
    let m = states.len();
    let w = |i: usize| if i == 0 || i == m - 1 { 0.5 * h } else { h };
    let mut single = 0.0;
    for (i, (_, a)) in states.iter().enumerate() {
        single += a.l2_norm().powf(p) * w(i);
    }
    let mut double = 0.0;
    for i in 0..m {
        for j in (i + 1)..m {
            let d = states[i].1.difference(&states[j].1).l2_norm();
            let gap = times[j] - times[i];
            double += 2.0 * d.powf(p) / gap.powf(1.0 + alpha * p) * w(i) * w(j);
        }
    }
    Ok(double + single)
}
