use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamVector, Tape, Var};
use crate::error::{check_len, Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Softplus,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => math::tanh(x),
            Activation::Softplus => math::softplus(x),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => {
                let t = math::tanh(x);
                1.0 - t * t
            }
            Activation::Softplus => math::sigmoid(x),
        }
    }

    pub fn record(self, tape: &mut Tape, x: Var) -> Var {
        match self {
            Activation::Tanh => tape.tanh(x),
            Activation::Softplus => tape.softplus(x),
        }
    }
}

/// Fully connected network: affine layers with an activation after every
/// hidden layer and a linear output layer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    pub activation: Activation,
}

/// Uniform samples in `±√(6 / (fan_in + fan_out))`.
pub fn glorot_uniform<R: Rng + ?Sized>(rng: &mut R, fan_in: usize, fan_out: usize, n: usize) -> Vec<f64> {
    let a = math::sqrt(6.0 / (fan_in + fan_out) as f64);
    (0..n).map(|_| rng.random_range(-a..a)).collect()
}

impl MlpSpec {
    pub fn new(input: usize, hidden: &[usize], output: usize, activation: Activation) -> Result<Self> {
        let spec = Self {
            input,
            hidden: hidden.to_vec(),
            output,
            activation,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::InvalidParameter("an MLP needs at least one hidden layer".into()));
        }
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return Err(Error::InvalidParameter("MLP widths must be positive".into()));
        }
        Ok(())
    }

    /// `[input, hidden.., output]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![self.input];
        w.extend_from_slice(&self.hidden);
        w.push(self.output);
        w
    }

    pub fn layers(&self) -> usize {
        self.hidden.len() + 1
    }

    pub fn param_count(&self) -> usize {
        self.widths().windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn build(&self, mut weights: impl FnMut(usize, usize, usize) -> Vec<f64>) -> ParamVector {
        let mut pv = ParamVector::new();
        for (l, w) in self.widths().windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            let values = weights(l, fan_in, fan_out);
            pv.push(format!("w{l}"), &[fan_out, fan_in], &values);
            pv.push(format!("b{l}"), &[fan_out], &vec![0.0; fan_out]);
        }
        pv
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        self.build(|_, fi, fo| glorot_uniform(rng, fi, fo, fi * fo))
    }

    pub fn zeros(&self) -> ParamVector {
        self.build(|_, fi, fo| vec![0.0; fi * fo])
    }

    pub fn check_params(&self, params: &ParamVector) -> Result<()> {
        check_len("MLP parameters", self.param_count(), params.len())?;
        if params.layout.len() != 2 * self.layers() {
            return Err(Error::Shape(format!(
                "MLP expects {} parameter blocks, got {}",
                2 * self.layers(),
                params.layout.len()
            )));
        }
        Ok(())
    }

    /// Direct evaluation without a tape.
    pub fn forward(&self, params: &ParamVector, x: &[f64]) -> Result<Vec<f64>> {
        self.check_params(params)?;
        check_len("MLP input", self.input, x.len())?;
        let widths = self.widths();
        let mut h = x.to_vec();
        for l in 0..self.layers() {
            let (fi, fo) = (widths[l], widths[l + 1]);
            let w = params.block_values(2 * l);
            let b = params.block_values(2 * l + 1);
            let mut next = vec![0.0; fo];
            for r in 0..fo {
                let row = &w[r * fi..(r + 1) * fi];
                next[r] = b[r] + row.iter().zip(&h).map(|(a, c)| a * c).sum::<f64>();
            }
            if l + 1 < self.layers() {
                next.iter_mut().for_each(|v| *v = self.activation.apply(*v));
            }
            h = next;
        }
        Ok(h)
    }

    /// Scalar output and its gradient with respect to the input, by a
    /// hand-written backward pass (no tape).
    pub fn value_and_input_grad(&self, params: &ParamVector, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_params(params)?;
        check_len("MLP input", self.input, x.len())?;
        check_len("MLP output", 1, self.output)?;
        let widths = self.widths();
        let nl = self.layers();
        let mut pres: Vec<Vec<f64>> = Vec::with_capacity(nl);
        let mut h = x.to_vec();
        for l in 0..nl {
            let (fi, fo) = (widths[l], widths[l + 1]);
            let w = params.block_values(2 * l);
            let b = params.block_values(2 * l + 1);
            let mut pre = vec![0.0; fo];
            for r in 0..fo {
                pre[r] = b[r] + w[r * fi..(r + 1) * fi].iter().zip(&h).map(|(a, c)| a * c).sum::<f64>();
            }
            h = if l + 1 < nl { pre.iter().map(|&v| self.activation.apply(v)).collect() } else { pre.clone() };
            pres.push(pre);
        }
        let mut delta = vec![1.0];
        for l in (0..nl).rev() {
            let (fi, fo) = (widths[l], widths[l + 1]);
            if l + 1 < nl {
                for (d, &p) in delta.iter_mut().zip(&pres[l]) {
                    *d *= self.activation.derivative(p);
                }
            }
            let w = params.block_values(2 * l);
            let mut back = vec![0.0; fi];
            for r in 0..fo {
                let d = delta[r];
                for (bk, wk) in back.iter_mut().zip(&w[r * fi..(r + 1) * fi]) {
                    *bk += d * wk;
                }
            }
            delta = back;
        }
        Ok((h[0], delta))
    }

    /// Records the network on `tape`. `leaves` are the parameter blocks in
    /// layout order (`w0, b0, w1, b1, ..`).
    pub fn record(&self, tape: &mut Tape, leaves: &[Var], x: Var) -> Var {
        assert_eq!(leaves.len(), 2 * self.layers(), "MLP leaf count");
        assert_eq!(tape.len_of(x), self.input, "MLP input width");
        let widths = self.widths();
        let mut h = x;
        for l in 0..self.layers() {
            h = tape.affine(leaves[2 * l], h, leaves[2 * l + 1], widths[l + 1], widths[l]);
            if l + 1 < self.layers() {
                h = self.activation.record(tape, h);
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_count_matches_layout() {
        let spec = MlpSpec::new(3, &[5, 4], 2, Activation::Tanh).unwrap();
        assert_eq!(spec.param_count(), 3 * 5 + 5 + 5 * 4 + 4 + 4 * 2 + 2);
        let pv = spec.init(&mut ChaCha8Rng::seed_from_u64(0));
        assert_eq!(pv.len(), spec.param_count());
        pv.validate().unwrap();
    }

    #[test]
    fn rejects_missing_hidden_layer_and_zero_widths() {
        assert!(MlpSpec::new(2, &[], 1, Activation::Tanh).is_err());
        assert!(MlpSpec::new(2, &[0], 1, Activation::Tanh).is_err());
    }

    #[test]
    fn zero_network_outputs_zero() {
        let spec = MlpSpec::new(2, &[8, 8], 3, Activation::Softplus).unwrap();
        let y = spec.forward(&spec.zeros(), &[0.3, -2.0]).unwrap();
        assert_eq!(y, vec![0.0; 3]);
    }

    #[test]
    fn unit_weights_tanh_is_zero_at_origin() {
        let spec = MlpSpec::new(1, &[2], 1, Activation::Tanh).unwrap();
        let mut pv = spec.zeros();
        pv.slice_mut("w0").unwrap().fill(1.0);
        pv.slice_mut("w1").unwrap().fill(1.0);
        assert_eq!(spec.forward(&pv, &[0.0]).unwrap(), vec![0.0]);
    }

    #[test]
    fn identity_affine_layer() {
        let mut tape = Tape::new();
        let w = tape.param(&[1.0, 0.0, 0.0, 1.0]);
        let b = tape.param(&[0.0, 0.0]);
        let x = tape.input(&[1.0, 2.0]);
        let y = tape.affine(w, x, b, 2, 2);
        assert_eq!(tape.value(y), &[1.0, 2.0]);
    }

    #[test]
    fn width_mismatch_is_an_error() {
        let spec = MlpSpec::new(2, &[4], 1, Activation::Tanh).unwrap();
        assert!(spec.forward(&spec.zeros(), &[1.0]).is_err());
    }

    #[test]
    fn tape_and_direct_forward_agree() {
        let spec = MlpSpec::new(3, &[6, 5], 2, Activation::Softplus).unwrap();
        let pv = spec.init(&mut ChaCha8Rng::seed_from_u64(3));
        let x = [0.2, -0.7, 1.1];
        let mut tape = Tape::new();
        let leaves = pv.record(&mut tape);
        let xv = tape.input(&x);
        let y = spec.record(&mut tape, &leaves.vars, xv);
        let direct = spec.forward(&pv, &x).unwrap();
        for (a, b) in tape.value(y).iter().zip(&direct) {
            assert!((a - b).abs() < 1e-14);
        }
    }
}
