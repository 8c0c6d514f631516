//! Losses, the two-phase FS-HNN pipeline, the optimiser and rollout metrics.

mod adam;
mod data;
mod loss;
mod metrics;
mod pipeline;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use data::{derivative_estimate, gradient_samples, pairs, subsample, Pair, Sample};
pub use loss::{hnn_grad_loss, mlp_onestep_loss, pde_onestep_loss, LossGrad, PdeLossGrad, PdeTrainable};
pub use metrics::{energy_deviation, evaluate, mse_curve, rollout_mse, EnergyDeviation, MetricReport};
pub use pipeline::{train_fs_hnn_ode, train_fs_hnn_pde, train_hnn, train_mlp, LossHistory, LossRecord};

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Training objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Match `J∇H` to finite-difference derivatives.
    GradientMatching,
    /// Match one model step to the next frame.
    OneStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub epochs_phase1: usize,
    pub epochs_phase2: usize,
    pub batch_size: usize,
    pub intervals: Vec<usize>,
    pub seed: u64,
    pub loss_phase1: LossKind,
    pub loss_phase2: LossKind,
    /// Keep component parameters fixed while the combiner trains.
    pub freeze_components: bool,
    /// Frames `0..=window` of each trajectory are used for training.
    pub window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let adam = AdamConfig::default();
        Self {
            lr: adam.lr,
            beta1: adam.beta1,
            beta2: adam.beta2,
            eps: adam.eps,
            epochs_phase1: 200,
            epochs_phase2: 100,
            batch_size: 32,
            intervals: vec![1, 2, 3],
            seed: 0,
            loss_phase1: LossKind::GradientMatching,
            loss_phase2: LossKind::GradientMatching,
            freeze_components: true,
            window: 10,
        }
    }
}

impl TrainConfig {
    pub fn adam(&self) -> AdamConfig {
        AdamConfig { lr: self.lr, beta1: self.beta1, beta2: self.beta2, eps: self.eps }
    }

    /// Checks the settings against a model with `k` components.
    pub fn validate(&self, k: usize) -> Result<()> {
        let bad = |m: alloc::string::String| Err(Error::InvalidParameter(m));
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return bad(format!("learning rate {} must be positive", self.lr));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return bad(format!("{name} {b} must lie in [0, 1)"));
            }
        }
        if !(self.eps > 0.0) {
            return bad(format!("eps {} must be positive", self.eps));
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.intervals.len() != k {
            return bad(format!("{} intervals for a model with {k} components", self.intervals.len()));
        }
        if self.intervals.iter().any(|&i| i == 0 || i > self.window) {
            return bad(format!("intervals must lie in 1..={} (the training window)", self.window));
        }
        Ok(())
    }

    fn expect_loss(&self, phase: u8, want: LossKind) -> Result<()> {
        let got = if phase == 1 { self.loss_phase1 } else { self.loss_phase2 };
        if got != want {
            return Err(Error::InvalidParameter(format!("phase {phase} loss {got:?} does not fit this model, expected {want:?}")));
        }
        Ok(())
    }
}
