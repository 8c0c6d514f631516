use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::combiner::Combiner;
use super::PhaseHamiltonian;
use crate::autodiff::{ParamLeaves, ParamVector, Tape, Var};
use crate::error::{check_len, Error, Result};
use crate::nn::{Activation, MlpSpec};

/// A single MLP Hamiltonian `H_θ : ℝ^{2d} → ℝ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HnnModel {
    pub dof: usize,
    pub spec: MlpSpec,
    pub params: ParamVector,
}

impl HnnModel {
    pub fn new<R: Rng + ?Sized>(dof: usize, hidden: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let spec = MlpSpec::new(2 * dof, hidden, 1, activation)?;
        let params = spec.init(rng);
        Ok(Self { dof, spec, params })
    }

    pub fn validate(&self) -> Result<()> {
        check_len("HNN input", 2 * self.dof, self.spec.input)?;
        check_len("HNN output", 1, self.spec.output)?;
        self.spec.check_params(&self.params)
    }
}

impl PhaseHamiltonian for HnnModel {
    fn dof(&self) -> usize {
        self.dof
    }

    fn groups(&self) -> Vec<&ParamVector> {
        vec![&self.params]
    }

    fn groups_mut(&mut self) -> Vec<&mut ParamVector> {
        vec![&mut self.params]
    }

    fn record(&self, tape: &mut Tape, leaves: &[ParamLeaves], z: Var) -> Result<Var> {
        check_len("HNN parameter groups", 1, leaves.len())?;
        Ok(self.spec.record(tape, &leaves[0].vars, z))
    }

    fn energy_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.spec.value_and_input_grad(&self.params, z)
    }
}

/// `H(z) = C(M_1(z), …, M_K(z))`, each component trained on data subsampled
/// at its own interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsHnnOdeModel {
    pub dof: usize,
    pub components: Vec<HnnModel>,
    pub intervals: Vec<usize>,
    pub combiner: Combiner,
}

impl FsHnnOdeModel {
    pub fn new<R: Rng + ?Sized>(
        dof: usize,
        intervals: &[usize],
        hidden: &[usize],
        combiner_hidden: &[usize],
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let components = intervals
            .iter()
            .map(|_| HnnModel::new(dof, hidden, activation, rng))
            .collect::<Result<Vec<_>>>()?;
        let combiner = Combiner::new(intervals.len(), combiner_hidden, activation, rng)?;
        let model = Self { dof, components, intervals: intervals.to_vec(), combiner };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("at least one component is required".into()));
        }
        check_len("intervals", self.components.len(), self.intervals.len())?;
        if self.intervals[0] == 0 || self.intervals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("intervals must be positive and strictly increasing".into()));
        }
        check_len("combiner width", self.components.len(), self.combiner.k)?;
        for c in &self.components {
            check_len("component DOF", self.dof, c.dof)?;
            c.validate()?;
        }
        self.combiner.validate()
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    /// Component energies `M_k(z)`.
    pub fn component_energies(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.components.iter().map(|c| c.energy(z)).collect()
    }
}

impl PhaseHamiltonian for FsHnnOdeModel {
    fn dof(&self) -> usize {
        self.dof
    }

    fn groups(&self) -> Vec<&ParamVector> {
        let mut g: Vec<&ParamVector> = self.components.iter().map(|c| &c.params).collect();
        g.push(&self.combiner.params);
        g
    }

    fn groups_mut(&mut self) -> Vec<&mut ParamVector> {
        let mut g: Vec<&mut ParamVector> = self.components.iter_mut().map(|c| &mut c.params).collect();
        g.push(&mut self.combiner.params);
        g
    }

    fn record(&self, tape: &mut Tape, leaves: &[ParamLeaves], z: Var) -> Result<Var> {
        let k = self.k();
        check_len("FS-HNN parameter groups", k + 1, leaves.len())?;
        let ms: Vec<Var> = self
            .components
            .iter()
            .zip(leaves)
            .map(|(c, l)| c.spec.record(tape, &l.vars, z))
            .collect();
        let m = tape.concat(&ms);
        Ok(self.combiner.record(tape, &leaves[k].vars, m))
    }

    fn energy_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut ms = Vec::with_capacity(self.k());
        let mut grads = Vec::with_capacity(self.k());
        for c in &self.components {
            let (m, g) = c.energy_and_grad(z)?;
            ms.push(m);
            grads.push(g);
        }
        let (h, dc) = self.combiner.eval_with_grad(&ms)?;
        let mut grad = vec![0.0; z.len()];
        for (w, g) in dc.iter().zip(&grads) {
            for (o, gi) in grad.iter_mut().zip(g) {
                *o += w * gi;
            }
        }
        Ok((h, grad))
    }
}
