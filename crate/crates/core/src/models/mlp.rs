use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::ParamVector;
use crate::error::{check_len, Result};
use crate::nn::{Activation, MlpSpec};

/// Black-box one-step map `z ↦ z + net(z)` at a fixed frame spacing of
/// `interval` data steps. The output layer starts at zero, so a fresh model
/// is the identity map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpDynamicsModel {
    pub spec: MlpSpec,
    pub params: ParamVector,
    pub interval: usize,
}

impl MlpDynamicsModel {
    pub fn new<R: Rng + ?Sized>(dim: usize, hidden: &[usize], activation: Activation, interval: usize, rng: &mut R) -> Result<Self> {
        let spec = MlpSpec::new(dim, hidden, dim, activation)?;
        let mut params = spec.init(rng);
        let last = spec.layers() - 1;
        for v in params.slice_mut(&alloc::format!("w{last}")).into_iter().flatten() {
            *v = 0.0;
        }
        Ok(Self { spec, params, interval })
    }

    pub fn dim(&self) -> usize {
        self.spec.input
    }

    pub fn validate(&self) -> Result<()> {
        check_len("MLP dynamics output", self.spec.input, self.spec.output)?;
        self.spec.check_params(&self.params)
    }

    pub fn step(&self, z: &[f64]) -> Result<Vec<f64>> {
        let d = self.spec.forward(&self.params, z)?;
        Ok(z.iter().zip(&d).map(|(a, b)| a + b).collect())
    }
}
