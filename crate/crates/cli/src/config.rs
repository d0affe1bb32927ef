//! Experiment configuration: pure data, resolved against the corpus
//! registry. Unknown keys are hard errors.

use serde::Deserialize;

fn default_one() -> usize {
    1
}

fn default_quad_order() -> usize {
    5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub drift: String,
    #[serde(default)]
    pub diffusions: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplexSpec {
    pub vertices: Vec<Vec<f64>>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainEntrySpec {
    pub vertices: Vec<Vec<f64>>,
    pub sign: f64,
}

/// One experiment run: which verifier, on which corpus data, at which
/// resolution, against which tolerance.
#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Experiment name; `stoflow list` prints the catalogue.
    pub experiment: String,
    /// Drift and diffusion fields by corpus name.
    pub system: Option<SystemSpec>,
    /// Integration domain: a single simplex ...
    #[serde(default)]
    pub simplex: Option<SimplexSpec>,
    /// ... or a signed simplicial chain.
    #[serde(default)]
    pub chain: Option<Vec<ChainEntrySpec>>,
    /// Integrand form by corpus name (identity/martingale experiments).
    #[serde(default)]
    pub form: Option<String>,
    /// Scalar density by corpus name (transport/continuity experiments).
    #[serde(default)]
    pub density: Option<String>,
    pub horizon: f64,
    pub steps: usize,
    #[serde(default = "default_one")]
    pub paths: usize,
    /// Bridge-refinement levels; level l runs on 2^l times the steps.
    #[serde(default = "default_one")]
    pub levels: usize,
    pub seed: u64,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
    /// Pass/fail threshold; its meaning per experiment is listed in the
    /// README (residual, gap, standard-error units, ...).
    pub tolerance: f64,
    /// Optional extra gate: the fitted convergence order must reach this
    /// value (needs levels >= 3).
    #[serde(default)]
    pub min_order: Option<f64>,
    /// Negative controls: pass when the statistic exceeds the tolerance.
    #[serde(default)]
    pub expect_reject: bool,
    /// Grid resolution per angle for torus grid sweeps.
    #[serde(default)]
    pub grid: Option<usize>,
    /// Fourier mode for the density-constancy experiment.
    #[serde(default)]
    pub mode: Option<[i64; 2]>,
    /// Half-width (in steps) of the centered window used by the
    /// expectation-derivative check.
    #[serde(default)]
    pub window: Option<usize>,
    /// CSV output path; a JSON summary lands next to it.
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| format!("invalid config: {e}"))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.horizon > 0.0) {
            return Err("horizon must be positive".into());
        }
        if self.steps == 0 {
            return Err("steps must be positive".into());
        }
        if self.steps % 4 != 0 {
            return Err("steps must be a multiple of 4 (quarter checkpoints)".into());
        }
        if self.paths == 0 || self.levels == 0 {
            return Err("paths and levels must be positive".into());
        }
        if !(self.tolerance > 0.0) {
            return Err("tolerance must be positive".into());
        }
        if !(1..=7).contains(&self.quad_order) {
            return Err("quad_order must be between 1 and 7".into());
        }
        Ok(())
    }
}
