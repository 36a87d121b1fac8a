//! Experiment configuration, read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generators::gen_chain_model;
use crate::model::RbmModel;
use crate::regression::{AlphatronConfig, AssemblyConfig};
use crate::structure::Symmetrization;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    #[default]
    Structure,
    StateLearning,
    PartialLearning,
}

/// `Sampled` draws shots; `InfiniteSample` replaces every empirical
/// statistic by its exact value. Rows of infinite-sample runs report `M = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataMode {
    #[default]
    Sampled,
    InfiniteSample,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSource {
    Chain { n: usize, j: f64, h: f64, g: f64 },
    /// Model JSON; relative paths resolve against the config file.
    File { path: PathBuf },
}

impl ModelSource {
    pub fn load(&self) -> Result<RbmModel> {
        match self {
            ModelSource::Chain { n, j, h, g } => gen_chain_model(*n, *j, *h, *g),
            ModelSource::File { path } => Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerConfig {
    /// Inverse-CDF draws from the enumerated table.
    #[default]
    Exact,
    Gibbs {
        #[serde(default = "default_burn_in")]
        burn_in: usize,
        #[serde(default = "one")]
        thinning: usize,
        #[serde(default = "one")]
        chains: usize,
    },
}

fn default_burn_in() -> usize {
    1000
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    #[default]
    None,
    LinfPerturb,
    Bitflip,
}

fn infinite() -> f64 {
    f64::INFINITY
}

/// Noise level either given directly or as a fraction of the covariance
/// learner's robustness limit for the model's own `(α, β, d₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    #[serde(default)]
    pub kind: NoiseKind,
    pub eps_inf: Option<f64>,
    pub eps_inf_fraction_of_limit: Option<f64>,
    pub rho: Option<f64>,
    pub rho_fraction_of_limit: Option<f64>,
    #[serde(default = "infinite", with = "crate::pnorm")]
    pub p_norm: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            kind: NoiseKind::None,
            eps_inf: None,
            eps_inf_fraction_of_limit: None,
            rho: None,
            rho_fraction_of_limit: None,
            p_norm: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    #[default]
    Lc,
    Ferro,
}

/// Thresholds left unset are computed from the model's tight `(α, β, d₂)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerSpec {
    #[serde(default)]
    pub kind: LearnerKind,
    pub tau: Option<f64>,
    pub max_set: Option<usize>,
    pub eta: Option<f64>,
    pub k: Option<usize>,
    #[serde(default)]
    pub symmetrization: Symmetrization,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StateConfig {
    /// Skip structure learning and regress on the true two-hop graph.
    pub use_true_structure: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PartialConfig {
    /// Query nodes, 1-based.
    pub nodes: Vec<usize>,
    /// Boundary assignments below this probability are not scored.
    pub min_boundary_prob: f64,
    pub use_true_structure: bool,
}

impl Default for PartialConfig {
    fn default() -> Self {
        Self { nodes: Vec::new(), min_boundary_prob: 0.01, use_true_structure: true }
    }
}

/// Requested accuracies, echoed into the report next to what was achieved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Targets {
    pub eps_t: f64,
    pub eps_c: f64,
    pub zeta: f64,
}

impl Default for Targets {
    fn default() -> Self {
        Self { eps_t: 0.1, eps_c: 0.05, zeta: 0.1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub experiment: ExperimentKind,
    #[serde(default)]
    pub mode: DataMode,
    #[serde(default)]
    pub sample_sizes: Vec<usize>,
    pub trials: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub workers: usize,
    pub model: ModelSource,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub noise: NoiseConfig,
    #[serde(default)]
    pub learner: LearnerSpec,
    #[serde(default)]
    pub regression: AlphatronConfig,
    #[serde(default)]
    pub assembly: AssemblyConfig,
    #[serde(default)]
    pub state: StateConfig,
    #[serde(default)]
    pub partial: PartialConfig,
    #[serde(default)]
    pub targets: Targets,
}

fn config_error<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file and resolves a relative model path against it.
    pub fn from_file(path: &Path) -> Result<Self> {
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if let ModelSource::File { path: model_path } = &mut cfg.model {
            if model_path.is_relative() {
                if let Some(dir) = path.parent() {
                    *model_path = dir.join(&*model_path);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return config_error(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.trials == 0 {
            return config_error("trials must be at least 1");
        }
        if self.mode == DataMode::Sampled {
            if self.sample_sizes.is_empty() {
                return config_error("sample_sizes must not be empty in sampled mode");
            }
            if self.sample_sizes.windows(2).any(|w| w[0] >= w[1]) {
                return config_error("sample_sizes must be strictly increasing");
            }
            if self.sample_sizes[0] < 2 {
                return config_error("every sample size must be at least 2");
            }
        }
        let n = self.noise;
        match n.kind {
            NoiseKind::None => {}
            NoiseKind::LinfPerturb => {
                if n.eps_inf.is_some() == n.eps_inf_fraction_of_limit.is_some() {
                    return config_error("linf_perturb needs exactly one of eps_inf, eps_inf_fraction_of_limit");
                }
                if matches!(self.sampler, SamplerConfig::Gibbs { .. }) {
                    return config_error("linf_perturb needs the exact sampler");
                }
            }
            NoiseKind::Bitflip => {
                if n.rho.is_some() == n.rho_fraction_of_limit.is_some() {
                    return config_error("bitflip needs exactly one of rho, rho_fraction_of_limit");
                }
            }
        }
        if !(n.p_norm >= 1.0) {
            return config_error("noise.p_norm must be at least 1");
        }
        if self.experiment == ExperimentKind::PartialLearning {
            if self.partial.nodes.is_empty() {
                return config_error("partial.nodes must list at least one node");
            }
            if self.partial.nodes.contains(&0) {
                return config_error("partial.nodes are 1-based");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
schema_version = 1
sample_sizes = [100, 200]
trials = 2

[model]
kind = "chain"
n = 4
j = 1.0
h = -0.1
g = -0.1
"#;

    #[test]
    fn minimal_config_defaults() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, ExperimentKind::Structure);
        assert_eq!(cfg.noise.kind, NoiseKind::None);
        assert!(cfg.noise.p_norm.is_infinite());
        assert_eq!(cfg.regression.holdout_fraction, 0.2);
        assert_eq!(cfg.model.load().unwrap().n(), 4);
    }

    #[test]
    fn toml_round_trip() {
        let cfg = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_invalid_configs() {
        let bad = [
            MINIMAL.replace("schema_version = 1", "schema_version = 9"),
            MINIMAL.replace("trials = 2", "trials = 0"),
            MINIMAL.replace("[100, 200]", "[200, 100]"),
            MINIMAL.replace("trials = 2", "trials = 2\nbogus = 1"),
            format!("{MINIMAL}\n[noise]\nkind = \"linf_perturb\"\n"),
        ];
        for text in bad {
            assert!(matches!(ExperimentConfig::from_toml_str(&text), Err(Error::Config(_))), "{text}");
        }
    }
}
