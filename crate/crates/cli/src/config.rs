//! Run configuration: one JSON document, every field optional on input and
//! fully materialized on output.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use neuroplex::analysis::SweepGrid;
use neuroplex::ensemble::EnsembleConfig;
use neuroplex::pipeline::{PipelineConfig, SolverSettings};
use neuroplex::rng::RNG_ALGORITHM;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSettings {
    pub grid: SweepGrid,
    pub trials: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self { grid: SweepGrid::default(), trials: 50 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Random generator name; only `chacha20` is supported.
    pub rng: String,
    pub master_seed: u64,
    pub trials: usize,
    pub output_dir: PathBuf,
    pub ensemble: EnsembleConfig,
    pub receiver_noise_variance: f64,
    pub solver: SolverSettings,
    pub threshold: f64,
    /// Signals written by `simulate-neuron`.
    pub signals: usize,
    pub sweep: SweepSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            rng: RNG_ALGORITHM.to_string(),
            master_seed: 42,
            trials: 1,
            output_dir: PathBuf::from("out"),
            ensemble: p.ensemble,
            receiver_noise_variance: p.receiver_noise_variance,
            solver: p.solver,
            threshold: p.threshold,
            signals: 4,
            sweep: SweepSettings::default(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        match serde_path_to_error::deserialize(de) {
            Ok(cfg) => Ok(cfg),
            Err(e) => {
                let path = e.path().to_string();
                bail!("config field `{path}`: {}", e.into_inner())
            }
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            ensemble: self.ensemble.clone(),
            receiver_noise_variance: self.receiver_noise_variance,
            solver: self.solver.clone(),
            threshold: self.threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rng != RNG_ALGORITHM {
            bail!("config field `rng`: unsupported generator `{}`, expected `{RNG_ALGORITHM}`", self.rng);
        }
        if self.trials == 0 {
            bail!("config field `trials`: must be at least 1");
        }
        if self.sweep.trials == 0 {
            bail!("config field `sweep.trials`: must be at least 1");
        }
        self.pipeline().validate()?;
        Ok(())
    }

    /// The configuration with the estimated `η` written in.
    pub fn resolved(&self) -> Self {
        let mut out = self.clone();
        out.solver = self.pipeline().resolved().solver;
        out
    }
}
