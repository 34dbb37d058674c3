use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::distribution::{PairDistribution, PairSampler};
use crate::model::{Embedding, EmbeddingConfig, WeightVector};
use crate::noise::{NoiseModel, NoiseSpec};
use crate::passive::MleSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    PassiveErm,
    PassiveMle,
    ActiveNoiseFree,
    ActiveNoisy,
    ImpossibilityDemo,
}

impl Mode {
    pub fn is_passive(self) -> bool {
        matches!(
            self,
            Mode::PassiveErm | Mode::PassiveMle | Mode::ImpossibilityDemo
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepGrid {
    N(Vec<usize>),
    Eps(Vec<f64>),
}

fn default_n_mc() -> usize {
    10_000
}

/// Experiment description, read from JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub m: usize,
    /// Input dimension; must match the embedding when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    pub noise: NoiseSpec,
    #[serde(default)]
    pub distribution: PairDistribution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embedding: Option<EmbeddingConfig>,
    /// Dataset size for passive modes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepGrid>,
    pub trials: usize,
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Optional per-trial detail file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jsonl: Option<PathBuf>,
    /// Fixed hidden weights; drawn uniformly from the simplex per trial otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_star: Option<Vec<f64>>,
    /// Monte Carlo pairs used to estimate the prediction error.
    #[serde(default = "default_n_mc")]
    pub n_mc: usize,
    #[serde(default)]
    pub mle: MleSettings,
}

impl ExperimentConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Usage(format!("invalid config: {e}")))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }
}

/// A config with its noise model, embedding and sampler built and checked.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub noise: NoiseModel,
    pub sampler: PairSampler,
    pub w_star: Option<WeightVector>,
}

fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        let c = &config;
        if c.m < 2 {
            return Err(usage(format!("m must be at least 2, got {}", c.m)));
        }
        if c.trials == 0 {
            return Err(usage("trials must be at least 1"));
        }
        if c.n_mc == 0 {
            return Err(usage("n_mc must be at least 1"));
        }
        let noise = c.noise.build()?;
        let embedding = match &c.embedding {
            Some(e) => Embedding::from_config(e, c.m)?,
            None => Embedding::identity(c.m),
        };
        if let Some(d) = c.d {
            if d != embedding.input_dim() {
                return Err(usage(format!(
                    "d = {d} but the embedding takes {} inputs",
                    embedding.input_dim()
                )));
            }
        }
        let sampler = PairSampler::new(c.distribution.clone(), embedding)?;
        let w_star = match &c.w_star {
            Some(w) => {
                if w.len() != c.m {
                    return Err(Error::DimensionMismatch {
                        expected: c.m,
                        got: w.len(),
                    });
                }
                Some(WeightVector::new(w.clone())?)
            }
            None => None,
        };

        match c.mode {
            Mode::PassiveErm | Mode::PassiveMle | Mode::ImpossibilityDemo => {
                if !matches!(c.sweep, Some(SweepGrid::N(_))) && c.n.unwrap_or(0) == 0 {
                    return Err(usage("passive modes need n >= 1"));
                }
                if c.mode == Mode::PassiveMle && noise.is_zero() {
                    return Err(usage("passive_mle needs a noise model with a density"));
                }
            }
            Mode::ActiveNoiseFree | Mode::ActiveNoisy => {
                if !matches!(c.sweep, Some(SweepGrid::Eps(_))) {
                    check_eps(c.eps)?;
                }
                if c.mode == Mode::ActiveNoiseFree && !noise.is_zero() {
                    return Err(usage("active_noise_free needs zero noise"));
                }
                if c.mode == Mode::ActiveNoisy {
                    if noise.is_zero() {
                        return Err(usage("active_noisy needs a noise model with a density"));
                    }
                    match c.delta {
                        Some(d) if d > 0.0 && d < 1.0 => {}
                        other => {
                            return Err(usage(format!(
                                "active_noisy needs delta in (0, 1), got {other:?}"
                            )))
                        }
                    }
                }
            }
        }
        match &c.sweep {
            Some(SweepGrid::N(ns)) => {
                if !c.mode.is_passive() {
                    return Err(usage("an n grid applies to passive modes only"));
                }
                if ns.contains(&0) {
                    return Err(usage("grid values of n must be >= 1"));
                }
            }
            Some(SweepGrid::Eps(es)) => {
                if c.mode.is_passive() {
                    return Err(usage("an eps grid applies to active modes only"));
                }
                for e in es {
                    check_eps(Some(*e))?;
                }
            }
            None => {}
        }
        Ok(Self {
            noise,
            sampler,
            w_star,
            config,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::new(ExperimentConfig::from_path(path)?)
    }
}

fn check_eps(eps: Option<f64>) -> Result<()> {
    match eps {
        Some(e) if e > 0.0 && e < 1.0 => Ok(()),
        other => Err(usage(format!("eps must lie in (0, 1), got {other:?}"))),
    }
}
