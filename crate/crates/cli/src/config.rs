//! Per-command configuration records.
//!
//! Each command reads one flat JSON object. Every key has a default, unknown
//! keys are rejected, and `--set key=value` overrides are merged into the
//! parsed JSON before validation.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::Failure;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum History {
    /// Constant at the positive stationary state `sqrt(1 - alpha)`.
    Stationary,
    /// Constant at `x0`.
    Constant,
    /// Random smooth profile of sup-norm `radius`, drawn from `seed`.
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub alpha: f64,
    pub tau: f64,
    pub m: usize,
    pub t_end: f64,
    pub history: History,
    pub x0: f64,
    pub radius: f64,
    pub seed: u64,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self { alpha: 0.5, tau: 1.0, m: 64, t_end: 20.0, history: History::Random, x0: 0.5, radius: 1.0, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RootsConfig {
    pub alpha: f64,
    pub tau: f64,
    /// Shift of the vertical line `Re p = -nu`; picked by the manifold test when absent.
    pub nu: Option<f64>,
    /// Lipschitz constant of the frequency condition; `3 + 3 alpha` when absent.
    pub lambda: Option<f64>,
}

impl Default for RootsConfig {
    fn default() -> Self {
        Self { alpha: 0.5, tau: 1.0, nu: None, lambda: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegionConfig {
    pub tau_range: [f64; 2],
    pub alpha_range: [f64; 2],
    pub resolution: usize,
    /// Write a generation-time comment into the SVG.
    pub timestamp: bool,
}

impl Default for RegionConfig {
    fn default() -> Self {
        let (t0, t1) = ddim_core::spectral::DEFAULT_TAU_RANGE;
        let (a0, a1) = ddim_core::spectral::DEFAULT_ALPHA_RANGE;
        Self {
            tau_range: [t0, t1],
            alpha_range: [a0, a1],
            resolution: ddim_core::spectral::DEFAULT_RESOLUTION,
            timestamp: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DimensionConfig {
    pub alpha: f64,
    pub tau: f64,
    pub m: usize,
    /// Time of the quasi-differential; `2 tau` when absent.
    pub t: Option<f64>,
    pub d: f64,
    pub samples: usize,
    /// Time discarded before the first sample.
    pub transient: f64,
    /// Time between samples along the orbit.
    pub spacing: f64,
    pub seed: u64,
}

impl Default for DimensionConfig {
    fn default() -> Self {
        Self { alpha: 0.5, tau: 1.0, m: 32, t: None, d: 1.0, samples: 8, transient: 50.0, spacing: 1.25, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BetaConfig {
    pub alpha: f64,
    pub tau: f64,
    pub m: usize,
    pub k_max: usize,
    pub restarts: usize,
    pub seed: u64,
    /// Allowed distance of `beta_1` from `(3 + alpha^2) / 2`.
    pub tolerance: f64,
}

impl Default for BetaConfig {
    fn default() -> Self {
        Self { alpha: 0.5, tau: 1.0, m: 128, k_max: 2, restarts: 32, seed: 0, tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TraceCheckConfig {
    pub alpha: f64,
    pub tau: f64,
    pub k: usize,
    /// Length of the check; `2 tau` when absent.
    pub t_end: Option<f64>,
    /// Grid sizes of the refinement study, coarse to fine.
    pub ms: Vec<usize>,
    /// Time run from the fixed start profile before the check begins.
    pub transient: f64,
    /// Allowed deviation on the finest grid.
    pub tolerance: f64,
}

impl Default for TraceCheckConfig {
    fn default() -> Self {
        Self { alpha: 0.5, tau: 1.0, k: 3, t_end: None, ms: vec![32, 64, 128], transient: 10.0, tolerance: 1e-3 }
    }
}

/// Parses `text`, applies `key=value` overrides and validates the result.
pub fn load<T: DeserializeOwned>(text: &str, sets: &[String]) -> Result<T, Failure> {
    let mut value: Value =
        serde_json::from_str(text).map_err(|e| Failure::Usage(format!("config is not valid JSON: {e}")))?;
    if !value.is_object() {
        return Err(Failure::Usage("config must be a JSON object".into()));
    }
    for s in sets {
        apply_set(&mut value, s)?;
    }
    serde_json::from_value(value).map_err(|e| Failure::Usage(format!("invalid config: {e}")))
}

/// `a.b=3` sets a nested key; values parse as JSON and fall back to strings.
fn apply_set(root: &mut Value, assignment: &str) -> Result<(), Failure> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("--set expects key=value, got `{assignment}`")))?;
    if key.is_empty() {
        return Err(Failure::Usage(format!("empty key in `{assignment}`")));
    }
    let parsed = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let obj =
            cur.as_object_mut().ok_or_else(|| Failure::Usage(format!("`{key}` does not name an object field")))?;
        if i + 1 == parts.len() {
            obj.insert(part.to_string(), parsed);
            return Ok(());
        }
        cur = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Default::default()));
    }
    unreachable!("split always yields at least one part")
}

/// Pretty JSON of the defaults, printed when no config is given.
pub fn schema_dump<T: Default + Serialize>() -> String {
    serde_json::to_string_pretty(&T::default()).expect("config records serialize")
}
