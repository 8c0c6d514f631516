use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamVector, Tape, Var};
use crate::error::{check_len, Result};
use crate::nn::{Activation, MlpSpec};

/// Maps `K` component energies to one energy:
///
/// `C(m) = w·m + b + r(m)`
///
/// where `r` is a small MLP whose output layer starts at zero. At
/// initialisation `w = 1/K`, `b = 0`, so `C` is the mean of the components
/// (and the identity when `K = 1`). Each component is pretrained against the
/// full energy, so the mean is the natural starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Combiner {
    pub k: usize,
    pub residual: MlpSpec,
    pub params: ParamVector,
}

impl Combiner {
    pub fn new<R: Rng + ?Sized>(k: usize, hidden: &[usize], activation: Activation, rng: &mut R) -> Result<Self> {
        let residual = MlpSpec::new(k, hidden, 1, activation)?;
        let mut res = residual.init(rng);
        let last = residual.layers() - 1;
        for v in res.slice_mut(&alloc::format!("w{last}")).into_iter().flatten() {
            *v = 0.0;
        }
        let mut params = ParamVector::new();
        params.push("lin.w", &[1, k], &vec![1.0 / k as f64; k]);
        params.push("lin.b", &[1], &[0.0]);
        params.extend_prefixed("res.", &res);
        Ok(Self { k, residual, params })
    }

    /// Exact sum of the inputs, with no residual network.
    pub fn summation(k: usize) -> Self {
        let residual = MlpSpec::new(k, &[1], 1, Activation::Tanh).expect("valid spec");
        let mut params = ParamVector::new();
        params.push("lin.w", &[1, k], &vec![1.0; k]);
        params.push("lin.b", &[1], &[0.0]);
        params.extend_prefixed("res.", &residual.zeros());
        Self { k, residual, params }
    }

    pub fn validate(&self) -> Result<()> {
        check_len("combiner input", self.k, self.residual.input)?;
        check_len("combiner parameters", 1 + self.k + self.residual.param_count(), self.params.len())?;
        self.params.validate()
    }

    fn residual_params(&self) -> ParamVector {
        let mut pv = ParamVector::new();
        for i in 2..self.params.layout.len() {
            let b = &self.params.layout[i];
            pv.push(b.name.trim_start_matches("res."), &b.shape, self.params.block_values(i));
        }
        pv
    }

    pub fn eval(&self, m: &[f64]) -> Result<f64> {
        Ok(self.eval_with_grad(m)?.0)
    }

    /// `C(m)` and `∂C/∂m`.
    pub fn eval_with_grad(&self, m: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("combiner input", self.k, m.len())?;
        let w = self.params.block_values(0);
        let b = self.params.block_values(1)[0];
        let (r, mut grad) = self.residual.value_and_input_grad(&self.residual_params(), m)?;
        let lin = b + w.iter().zip(m).map(|(a, c)| a * c).sum::<f64>();
        for (g, wi) in grad.iter_mut().zip(w) {
            *g += wi;
        }
        Ok((lin + r, grad))
    }

    /// Records `C(m)` for a length-`K` node `m`.
    pub fn record(&self, tape: &mut Tape, leaves: &[Var], m: Var) -> Var {
        let lin = tape.affine(leaves[0], m, leaves[1], 1, self.k);
        let res = self.residual.record(tape, &leaves[2..], m);
        tape.add(lin, res)
    }
}
