//! Run configuration: one JSON document describing grid, model, noise,
//! initial data, scheme and outputs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::error::{Result, SrswError};
use crate::initial::IcSpec;
use crate::noise::{member_seed, BasisSpec, NoiseBasis};
use crate::physics::{ParamValues, PhysicalParams, State};
use crate::picard::PicardConfig;
use crate::spectral::TorusGrid;
use crate::stepper::{stable_dt, IntegrationConfig, Model, Monitors, Scheme};

fn config_error(field: impl Into<String>, reason: impl Into<String>) -> SrswError {
    SrswError::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    #[serde(default = "default_length")]
    pub length: f64,
}

fn default_length() -> f64 {
    2.0 * std::f64::consts::PI
}

/// Truncation level `R`; `"inf"` (or `null`) runs the untruncated system.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Cutoff(pub Option<f64>);

impl Serialize for Cutoff {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self.0 {
            Some(r) => s.serialize_f64(r),
            None => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Cutoff {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct CutoffVisitor;
        impl Visitor<'_> for CutoffVisitor {
            type Value = Cutoff;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Cutoff, E> {
                Ok(Cutoff(Some(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Cutoff, E> {
                Ok(Cutoff(Some(v as f64)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Cutoff, E> {
                Ok(Cutoff(Some(v as f64)))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Cutoff, E> {
                match v {
                    "inf" | "infinity" | "Infinity" => Ok(Cutoff(None)),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
            fn visit_unit<E: de::Error>(self) -> std::result::Result<Cutoff, E> {
                Ok(Cutoff(None))
            }
        }
        d.deserialize_any(CutoffVisitor)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSettings {
    #[serde(default = "one")]
    pub paths: usize,
    #[serde(default)]
    pub base_seed: u64,
}

fn one() -> usize {
    1
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        Self {
            paths: 1,
            base_seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PicardSettings {
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_p")]
    pub p: f64,
}

fn default_tol() -> f64 {
    1e-10
}
fn default_max_iter() -> usize {
    20
}
fn default_alpha() -> f64 {
    0.25
}
fn default_p() -> f64 {
    4.0
}

impl Default for PicardSettings {
    fn default() -> Self {
        Self {
            tol: default_tol(),
            max_iter: default_max_iter(),
            alpha: default_alpha(),
            p: default_p(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
#[derive(Default)]
pub struct OutputSettings {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write a state snapshot every this many steps (0: final state only
    /// when `final_snapshot` is set).
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub final_snapshot: bool,
}

fn default_scheme() -> Scheme {
    Scheme::EmIto
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub grid: GridConfig,
    #[serde(default)]
    pub params: ParamValues,
    #[serde(default)]
    pub basis: BasisSpec,
    #[serde(default)]
    pub ic: IcSpec,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Omitted: the largest stable step that divides `T`.
    #[serde(default)]
    pub dt: Option<f64>,
    #[serde(rename = "R", default)]
    pub cutoff: Cutoff,
    #[serde(default)]
    pub monitors: Monitors,
    #[serde(default)]
    pub ensemble: EnsembleSettings,
    #[serde(default)]
    pub picard: PicardSettings,
    #[serde(default)]
    pub output: OutputSettings,
}

/// A validated configuration with everything built.
#[derive(Debug, Clone)]
pub struct PreparedRun {
    pub config: RunConfig,
    pub grid: Arc<TorusGrid>,
    pub params: PhysicalParams,
    pub basis: NoiseBasis,
    pub initial: State,
    pub integration: IntegrationConfig,
    pub config_hash: String,
}

impl RunConfig {
    /// Parses a JSON document; errors name the offending field path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path == "." {
                "<root>".to_string()
            } else {
                path
            };
            config_error(field, e.into_inner().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error("<file>", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 of the canonical (re-serialized) document.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(canonical.as_bytes()))
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.ensemble.base_seed = seed;
        self
    }

    /// Seed of ensemble member `index`; single runs use member 0.
    pub fn member_seed(&self, index: usize) -> u64 {
        member_seed(self.ensemble.base_seed, index as u64)
    }

    /// Validates every field and builds grid, model, basis and initial data.
    pub fn prepare(&self) -> Result<PreparedRun> {
        let grid = TorusGrid::new(self.grid.n, self.grid.length)
            .map_err(|e| config_error("grid", e.to_string()))?;
        let params = PhysicalParams::new(&grid, self.params).map_err(|e| match e {
            SrswError::InvalidParameter { name, reason } => {
                config_error(format!("params.{name}"), reason)
            }
            other => config_error("params", other.to_string()),
        })?;
        let basis = self
            .basis
            .build(&grid)
            .map_err(|e| config_error("basis", e.to_string()))?;
        let initial = self
            .ic
            .build(&grid)
            .map_err(|e| config_error("ic", e.to_string()))?;

        if !(self.t_final.is_finite() && self.t_final > 0.0) {
            return Err(config_error(
                "T",
                format!("must be positive, got {}", self.t_final),
            ));
        }
        if let Some(r) = self.cutoff.0 {
            if !(r.is_finite() && r > 0.0) {
                return Err(config_error(
                    "R",
                    format!("must be positive or \"inf\", got {r}"),
                ));
            }
        }
        for (name, levels) in [
            ("monitors.R", &self.monitors.r_levels),
            ("monitors.M", &self.monitors.m_levels),
        ] {
            if let Some(bad) = levels.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
                return Err(config_error(
                    name,
                    format!("levels must be positive, got {bad}"),
                ));
            }
        }
        if !(self.monitors.ceiling > 0.0) {
            return Err(config_error("monitors.ceiling", "must be positive"));
        }
        if self.ensemble.paths == 0 {
            return Err(config_error("ensemble.paths", "must be at least 1"));
        }
        if !(self.picard.tol > 0.0) {
            return Err(config_error("picard.tol", "must be positive"));
        }
        if self.picard.max_iter == 0 {
            return Err(config_error("picard.max_iter", "must be at least 1"));
        }

        let dt = match self.dt {
            Some(dt) => {
                if !(dt.is_finite() && dt > 0.0) {
                    return Err(config_error("dt", format!("must be positive, got {dt}")));
                }
                let steps = (self.t_final / dt).round();
                if steps < 1.0 || (steps * dt - self.t_final).abs() > 1e-9 * self.t_final {
                    return Err(config_error(
                        "dt",
                        format!("must divide T = {} into whole steps", self.t_final),
                    ));
                }
                dt
            }
            None => {
                let (limit, _) = stable_dt(&initial, &params, &basis, self.scheme)?;
                let limit = limit.min(self.t_final);
                self.t_final / (self.t_final / limit).ceil()
            }
        };

        let config_hash = self.hash();
        let mut integration =
            IntegrationConfig::new(self.scheme, self.t_final, dt).with_cutoff(self.cutoff.0);
        integration.monitors = self.monitors.clone();
        integration.enforce_stability = true;
        integration.store_every = self.output.snapshot_every;
        integration.seed = self.member_seed(0);
        integration.config_hash = config_hash.clone();

        // refuse to start on a violated stability rule
        crate::stepper::check_stability(dt, &initial, &params, &basis, self.scheme)?;

        Ok(PreparedRun {
            config: self.clone(),
            grid,
            params,
            basis,
            initial,
            integration,
            config_hash,
        })
    }
}

impl PreparedRun {
    pub fn model(&self) -> Model<'_> {
        Model {
            params: &self.params,
            basis: &self.basis,
            cutoff: self.config.cutoff.0,
        }
    }

    pub fn picard_config(&self) -> PicardConfig {
        let mut integration = self.integration.clone();
        integration.store_every = 1;
        let mut pc = PicardConfig::new(
            integration,
            self.config.picard.tol,
            self.config.picard.max_iter,
        );
        pc.alpha = self.config.picard.alpha;
        pc.p = self.config.picard.p;
        pc
    }
}
