//! Experiment configuration: one JSON document fixes a run end to end.

use std::path::Path;

use fshnn_core::models::PdeArch;
use fshnn_core::nn::Activation;
use fshnn_core::systems::{GenSettings, System};
use fshnn_core::train::{LossKind, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::Failure;

/// Environment variable that replaces both the generation and training
/// seeds.
pub const SEED_ENV: &str = "FSHNN_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Hnn,
    FsHnn,
    Mlp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSettings {
    pub family: Family,
    /// Subsampling intervals: one component each for FS-HNN, the union of
    /// subsampled data for HNN. The MLP uses the first as its frame spacing.
    pub intervals: Vec<usize>,
    pub hidden: Vec<usize>,
    pub combiner_hidden: Vec<usize>,
    pub activation: Activation,
    /// Field models only.
    pub pde: PdeArch,
}

impl Default for ModelSettings {
    fn default() -> Self {
        Self {
            family: Family::FsHnn,
            intervals: vec![1, 2, 3],
            hidden: vec![64, 64],
            combiner_hidden: vec![8],
            activation: Activation::Tanh,
            pde: PdeArch::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSettings {
    /// Model steps per rollout.
    pub rollout_steps: usize,
    /// Trajectories rolled out, taken from the start of the dataset.
    pub n_traj: usize,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { rollout_steps: 1000, n_traj: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: System,
    pub generation: GenSettings,
    #[serde(default)]
    pub model: ModelSettings,
    #[serde(default)]
    pub training: TrainConfig,
    #[serde(default)]
    pub evaluation: EvalSettings,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Failure::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config and applies the seed override from the environment.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path).map_err(|e| Failure::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        if let Ok(s) = std::env::var(SEED_ENV) {
            let seed = s.trim().parse().map_err(|_| Failure::Config(format!("{SEED_ENV}={s} is not an integer")))?;
            cfg.set_seed(seed);
        }
        Ok(cfg)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.generation.seed = seed;
        self.training.seed = seed;
    }

    /// The config with every default filled in.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.system.validate()?;
        let m = &self.model;
        if m.intervals.is_empty() {
            return Err(Failure::Config("model.intervals must not be empty".into()));
        }
        if m.intervals != self.training.intervals {
            return Err(Failure::Config(format!(
                "model.intervals {:?} and training.intervals {:?} differ",
                m.intervals, self.training.intervals
            )));
        }
        let field = matches!(self.system.layout(), fshnn_core::dataset::StateLayout::Field { .. });
        let want = if field || m.family == Family::Mlp { LossKind::OneStep } else { LossKind::GradientMatching };
        if self.training.loss_phase1 != want || self.training.loss_phase2 != want {
            return Err(Failure::Config(format!("this system and model family train with the {want:?} loss")));
        }
        if field && m.family != Family::FsHnn {
            return Err(Failure::Config("field systems support the fs_hnn family only".into()));
        }
        self.training.validate(m.intervals.len())?;
        Ok(())
    }
}
