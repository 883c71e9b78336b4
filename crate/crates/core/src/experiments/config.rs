use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::scenario_names;
use crate::error::{GaugeError, Result};

pub const CONFIG_SCHEMA: &str = "gaugelab.config/v1";

/// Parameters of one scenario run. Every field except `scenario` is optional;
/// unset fields fall back to the scenario defaults.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub schema: Option<String>,
    pub scenario: String,
    /// Base seed; case i uses a seed derived from (seed, i).
    pub seed: u64,
    /// Number of randomized cases.
    pub seeds: Option<usize>,
    /// Mesh levels or sampling resolutions.
    pub resolutions: Option<Vec<usize>>,
    pub geometry: GeometryParams,
    pub bundle: BundleParams,
    /// Per-check tolerance overrides, keyed by check name.
    pub tolerances: BTreeMap<String, f64>,
    /// Worker threads for concurrent cases; 0 or unset means the rayon default.
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryParams {
    pub radii: Option<Vec<f64>>,
    pub thetas: Option<Vec<f64>>,
    pub degrees: Option<Vec<i64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BundleParams {
    pub rank: Option<usize>,
    /// Curvature range [lo, hi] targeted by randomized inputs.
    pub curvature_range: Option<[f64; 2]>,
    pub amplitude: Option<f64>,
}

impl ScenarioConfig {
    pub fn new(scenario: &str) -> Self {
        ScenarioConfig { scenario: scenario.into(), ..Default::default() }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| GaugeError::Document(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(s) = &self.schema {
            if s != CONFIG_SCHEMA {
                return Err(GaugeError::Document(format!("unsupported config schema `{s}`")));
            }
        }
        if !scenario_names().contains(&self.scenario.as_str()) {
            return Err(GaugeError::UnknownScenario(self.scenario.clone()));
        }
        if self.seeds == Some(0) {
            return Err(GaugeError::PreconditionViolated("seeds must be positive".into()));
        }
        if let Some(r) = &self.resolutions {
            if r.is_empty() || r.contains(&0) {
                return Err(GaugeError::PreconditionViolated("resolutions must be positive".into()));
            }
        }
        if self.bundle.rank == Some(0) {
            return Err(GaugeError::PreconditionViolated("rank must be positive".into()));
        }
        if let Some([lo, hi]) = self.bundle.curvature_range {
            if !(lo > 0.0 && lo <= hi) {
                return Err(GaugeError::PreconditionViolated(format!("curvature range [{lo}, {hi}]")));
            }
        }
        for (k, v) in &self.tolerances {
            if !(*v >= 0.0) {
                return Err(GaugeError::PreconditionViolated(format!("tolerance `{k}` = {v}")));
            }
        }
        Ok(())
    }

    pub fn seeds_or(&self, default: usize) -> usize {
        self.seeds.unwrap_or(default)
    }

    pub fn resolutions_or(&self, default: &[usize]) -> Vec<usize> {
        self.resolutions.clone().unwrap_or_else(|| default.to_vec())
    }

    pub fn tolerance(&self, name: &str, default: f64) -> f64 {
        self.tolerances.get(name).copied().unwrap_or(default)
    }

    /// Seed of case `i`, decorrelated from neighbouring base seeds.
    pub fn case_seed(&self, i: usize) -> u64 {
        let mut z = self.seed.wrapping_add((i as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}
