//! Ensembles of independent noise paths and their summary statistics.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::PreparedRun;
use crate::error::Result;
use crate::noise::NoisePath;
use crate::stepper::{integrate, TrajectoryRecord};
use crate::verify::wilson_interval;

/// Integrates member `index` of the ensemble on its own noise path.
pub fn run_member(run: &PreparedRun, index: usize) -> Result<TrajectoryRecord> {
    let mut ic = run.integration.clone();
    ic.seed = run.config.member_seed(index);
    let path = NoisePath::for_basis(&run.basis, ic.dt, ic.steps(), ic.seed)?;
    integrate(&run.initial, run.model(), &path, &ic)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberRow {
    pub index: usize,
    pub seed: u64,
    pub blown_up: bool,
    pub last_finite_time: f64,
    /// First hitting time per `R` level.
    pub tau_r: Vec<Option<f64>>,
    /// First hitting time per `M` level.
    pub tau_hat_m: Vec<Option<f64>>,
    pub final_norm12: f64,
    pub final_t22: f64,
    pub sup_norm12: f64,
    pub sup_energy12: f64,
    pub final_mass: f64,
}

impl MemberRow {
    pub fn from_record(index: usize, rec: &TrajectoryRecord) -> Self {
        let s = rec.summary();
        Self {
            index,
            seed: rec.seed,
            blown_up: s.blown_up,
            last_finite_time: s.last_finite_time,
            tau_r: s.tau_r.iter().map(|h| h.time).collect(),
            tau_hat_m: s.tau_hat_m.iter().map(|h| h.time).collect(),
            final_norm12: s.final_norm12,
            final_t22: s.final_t22,
            sup_norm12: s.sup_norm12,
            sup_energy12: s.sup_energy12,
            final_mass: s.final_mass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantiles {
    pub mean: f64,
    pub q05: f64,
    pub q50: f64,
    pub q95: f64,
}

impl Quantiles {
    /// Linear-interpolation quantiles of the finite values.
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let q = |p: f64| {
            let pos = p * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self {
            mean: v.iter().sum::<f64>() / v.len() as f64,
            q05: q(0.05),
            q50: q(0.5),
            q95: q(0.95),
        })
    }
}

/// Fraction of paths that never reached a level, with a 95% Wilson interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Staying {
    /// `None` for "no blow-up"; otherwise the `R` level.
    pub level: Option<f64>,
    pub staying: usize,
    pub paths: usize,
    pub probability: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

impl Staying {
    fn new(level: Option<f64>, staying: usize, paths: usize) -> Self {
        let (ci_low, ci_high) = wilson_interval(staying, paths, 1.96);
        Self {
            level,
            staying,
            paths,
            probability: staying as f64 / paths as f64,
            ci_low,
            ci_high,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregates {
    pub paths: usize,
    pub blown_up: usize,
    pub final_norm12: Option<Quantiles>,
    pub sup_norm12: Option<Quantiles>,
    pub final_t22: Option<Quantiles>,
    /// Mean hitting time among paths that hit, per `R` level.
    pub mean_tau_r: Vec<Option<f64>>,
    pub staying_probability: Vec<Staying>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleStats {
    pub config_hash: String,
    pub base_seed: u64,
    pub r_levels: Vec<f64>,
    pub m_levels: Vec<f64>,
    pub rows: Vec<MemberRow>,
    pub aggregates: Aggregates,
}

impl EnsembleStats {
    /// Sorts rows by member index and derives all aggregates from them.
    pub fn from_rows(run: &PreparedRun, mut rows: Vec<MemberRow>) -> Self {
        rows.sort_by_key(|r| r.index);
        let r_levels = run.config.monitors.r_levels.clone();
        let aggregates = aggregate(&rows, &r_levels);
        Self {
            config_hash: run.config_hash.clone(),
            base_seed: run.config.ensemble.base_seed,
            r_levels,
            m_levels: run.config.monitors.m_levels.clone(),
            rows,
            aggregates,
        }
    }

    pub fn rows_csv(&self) -> String {
        let mut out = String::from("index,seed,blown_up,last_finite_time");
        for r in &self.r_levels {
            let _ = write!(out, ",tau_R_{r}");
        }
        for m in &self.m_levels {
            let _ = write!(out, ",tau_hat_M_{m}");
        }
        out.push_str(",final_norm12,final_t22,sup_norm12,sup_energy12,final_mass\n");
        let opt = |t: &Option<f64>| t.map(|x| x.to_string()).unwrap_or_default();
        for row in &self.rows {
            let _ = write!(
                out,
                "{},{},{},{}",
                row.index, row.seed, row.blown_up, row.last_finite_time
            );
            for t in row.tau_r.iter().chain(&row.tau_hat_m) {
                let _ = write!(out, ",{}", opt(t));
            }
            let _ = writeln!(
                out,
                ",{},{},{},{},{}",
                row.final_norm12, row.final_t22, row.sup_norm12, row.sup_energy12, row.final_mass
            );
        }
        out
    }

    /// Aggregate document (everything except the rows).
    pub fn aggregate_json(&self) -> String {
        let doc = serde_json::json!({
            "config_hash": self.config_hash,
            "base_seed": self.base_seed,
            "R": self.r_levels,
            "M": self.m_levels,
            "aggregates": self.aggregates,
        });
        serde_json::to_string_pretty(&doc).expect("aggregates serialize")
    }
}

pub fn aggregate(rows: &[MemberRow], r_levels: &[f64]) -> Aggregates {
    let paths = rows.len();
    let col = |f: fn(&MemberRow) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    let mut staying = vec![Staying::new(
        None,
        rows.iter().filter(|r| !r.blown_up).count(),
        paths,
    )];
    let mut mean_tau_r = Vec::new();
    for (j, &level) in r_levels.iter().enumerate() {
        let hits: Vec<f64> = rows.iter().filter_map(|r| r.tau_r[j]).collect();
        mean_tau_r.push((!hits.is_empty()).then(|| hits.iter().sum::<f64>() / hits.len() as f64));
        let stay = rows
            .iter()
            .filter(|r| !r.blown_up && r.tau_r[j].is_none())
            .count();
        staying.push(Staying::new(Some(level), stay, paths));
    }
    Aggregates {
        paths,
        blown_up: rows.iter().filter(|r| r.blown_up).count(),
        final_norm12: Quantiles::of(&col(|r| r.final_norm12)),
        sup_norm12: Quantiles::of(&col(|r| r.sup_norm12)),
        final_t22: Quantiles::of(&col(|r| r.final_t22)),
        mean_tau_r,
        staying_probability: staying,
    }
}

/// Runs all members in parallel; results do not depend on scheduling.
pub fn run_ensemble(run: &PreparedRun) -> Result<EnsembleStats> {
    let mut member_run = run.clone();
    member_run.integration.store_every = 0;
    let rows = (0..run.config.ensemble.paths)
        .into_par_iter()
        .map(|i| run_member(&member_run, i).map(|rec| MemberRow::from_record(i, &rec)))
        .collect::<Result<Vec<_>>>()?;
    Ok(EnsembleStats::from_rows(run, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::RunConfig;

    fn run(paths: usize) -> PreparedRun {
        RunConfig::from_json(&format!(
            r#"{{"grid": {{"n": 16}}, "T": 0.05, "basis": {{"K": 4, "A": 0.05}},
                "ic": {{"kind": "random", "seed": 1, "kmax": 2, "norm12": 0.1}},
                "monitors": {{"R": [0.1, 10]}}, "ensemble": {{"paths": {paths}, "base_seed": 9}}}}"#
        ))
        .unwrap()
        .prepare()
        .unwrap()
    }

    #[test]
    fn quantiles_of_known_values() {
        let q = Quantiles::of(&[3.0, 1.0, 2.0, f64::NAN, 4.0, 5.0]).unwrap();
        assert_eq!(q.mean, 3.0);
        assert_eq!(q.q50, 3.0);
        assert!((q.q05 - 1.2).abs() < 1e-12);
        assert!(Quantiles::of(&[]).is_none());
    }

    #[test]
    fn rows_are_ordered_and_aggregates_recomputable() {
        let r = run(6);
        let stats = run_ensemble(&r).unwrap();
        assert_eq!(stats.rows.len(), 6);
        assert!(stats.rows.iter().enumerate().all(|(i, row)| row.index == i));
        let mut shuffled = stats.rows.clone();
        shuffled.reverse();
        let again = EnsembleStats::from_rows(&r, shuffled);
        assert_eq!(again, stats);
        assert_eq!(aggregate(&stats.rows, &stats.r_levels), stats.aggregates);
        // R = 0.1 is hit at t = 0 by every path (‖a₀‖ = 0.1)
        assert_eq!(stats.aggregates.staying_probability[1].staying, 0);
        assert!(stats
            .rows_csv()
            .starts_with("index,seed,blown_up,last_finite_time,tau_R_0.1,tau_R_10,"));
    }

    #[test]
    fn single_member_matches_plain_integration() {
        let r = run(1);
        let rec = run_member(&r, 0).unwrap();
        let path = NoisePath::for_basis(
            &r.basis,
            r.integration.dt,
            r.integration.steps(),
            r.integration.seed,
        )
        .unwrap();
        let direct = integrate(&r.initial, r.model(), &path, &r.integration).unwrap();
        assert_eq!(rec.norms_csv(), direct.norms_csv());
    }
}
