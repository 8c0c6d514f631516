use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{glorot_uniform, Activation};
use crate::autodiff::{ConvShape, ParamVector, Tape, Var};
use crate::error::{check_len, Error, Result};
use crate::state::FieldState;

/// Residual CNN on periodic grids: lift to `hidden` channels, `depth`
/// residual blocks `x + conv(act(conv(x)))`, then project back to
/// `channels`. Every convolution wraps around both axes, so the output
/// shape equals the input shape and the map commutes with circular shifts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResConvSpec {
    pub channels: usize,
    pub hidden: usize,
    pub depth: usize,
    pub kernel: usize,
    pub activation: Activation,
}

impl ResConvSpec {
    pub fn validate(&self) -> Result<()> {
        if self.channels == 0 || self.hidden == 0 {
            return Err(Error::InvalidParameter("channel counts must be positive".into()));
        }
        if self.kernel % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "kernel size {} must be odd",
                self.kernel
            )));
        }
        Ok(())
    }

    fn convs(&self) -> Vec<(alloc::string::String, usize, usize)> {
        let mut v = vec![("lift".into(), self.channels, self.hidden)];
        for d in 0..self.depth {
            v.push((format!("block{d}.conv1"), self.hidden, self.hidden));
            v.push((format!("block{d}.conv2"), self.hidden, self.hidden));
        }
        v.push(("proj".into(), self.hidden, self.channels));
        v
    }

    pub fn param_count(&self) -> usize {
        let k2 = self.kernel * self.kernel;
        self.convs().iter().map(|(_, ci, co)| co * ci * k2 + co).sum()
    }

    fn build(&self, mut weights: impl FnMut(usize, usize, usize) -> Vec<f64>) -> ParamVector {
        let k = self.kernel;
        let mut pv = ParamVector::new();
        for (name, ci, co) in self.convs() {
            let w = weights(ci * k * k, co * k * k, co * ci * k * k);
            pv.push(format!("{name}.w"), &[co, ci, k, k], &w);
            pv.push(format!("{name}.b"), &[co], &vec![0.0; co]);
        }
        pv
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        self.build(|fi, fo, n| glorot_uniform(rng, fi, fo, n))
    }

    pub fn zeros(&self) -> ParamVector {
        self.build(|_, _, n| vec![0.0; n])
    }

    fn shape(&self, cin: usize, cout: usize, ny: usize, nx: usize) -> ConvShape {
        ConvShape {
            cin,
            cout,
            ny,
            nx,
            kernel: self.kernel,
        }
    }

    /// Records the operator applied to a `channels × ny × nx` node.
    pub fn record(&self, tape: &mut Tape, leaves: &[Var], g: Var, ny: usize, nx: usize) -> Var {
        assert_eq!(leaves.len(), 2 * (2 * self.depth + 2), "ResConv leaf count");
        let (c, h) = (self.channels, self.hidden);
        let mut x = tape.conv(g, leaves[0], leaves[1], self.shape(c, h, ny, nx));
        for d in 0..self.depth {
            let l = 2 + 4 * d;
            let y = tape.conv(x, leaves[l], leaves[l + 1], self.shape(h, h, ny, nx));
            let y = self.activation.record(tape, y);
            let y = tape.conv(y, leaves[l + 2], leaves[l + 3], self.shape(h, h, ny, nx));
            x = tape.add(x, y);
        }
        let n = leaves.len();
        tape.conv(x, leaves[n - 2], leaves[n - 1], self.shape(h, c, ny, nx))
    }

    pub fn forward(&self, params: &ParamVector, field: &FieldState) -> Result<FieldState> {
        check_len("ResConv parameters", self.param_count(), params.len())?;
        if field.channels != self.channels {
            return Err(Error::Shape(format!(
                "operator expects {} channels, field has {}",
                self.channels, field.channels
            )));
        }
        let mut tape = Tape::new();
        let leaves = params.record_const(&mut tape);
        let g = tape.input(&field.data);
        let y = self.record(&mut tape, &leaves.vars, g, field.ny, field.nx);
        let mut out = field.zeros_like();
        out.data.copy_from_slice(tape.value(y));
        Ok(out)
    }
}
