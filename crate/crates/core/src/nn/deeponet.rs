use alloc::format;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{Activation, MlpSpec};
use crate::autodiff::{ParamVector, Tape, Var};
use crate::error::{check_len, Error, Result};
use crate::state::FieldState;

/// Scalar functional of a periodic field:
///
/// `H(z) = cellArea · Σ_cells ⟨branch(pool(z)), trunk(x_cell)⟩`
///
/// The branch net sees the field average-pooled to a fixed
/// `stencil × stencil` grid per channel, so its size does not depend on the
/// grid resolution. The trunk net sees cell coordinates normalised to the
/// unit square, `(i / nx, j / ny)`. The grid sum runs in row-major order
/// (`j` outer, `i` inner) and is accumulated on the trunk side before the
/// inner product.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeepOnetSpec {
    pub channels: usize,
    pub stencil: usize,
    pub latent: usize,
    pub branch: MlpSpec,
    pub trunk: MlpSpec,
}

impl DeepOnetSpec {
    pub fn new(
        channels: usize,
        stencil: usize,
        latent: usize,
        branch_hidden: &[usize],
        trunk_hidden: &[usize],
        activation: Activation,
    ) -> Result<Self> {
        let spec = Self {
            channels,
            stencil,
            latent,
            branch: MlpSpec::new(channels * stencil * stencil, branch_hidden, latent, activation)?,
            trunk: MlpSpec::new(2, trunk_hidden, latent, activation)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        self.branch.validate()?;
        self.trunk.validate()?;
        if self.branch.output != self.latent || self.trunk.output != self.latent {
            return Err(Error::Shape(format!(
                "branch ({}) and trunk ({}) outputs must both equal the latent width {}",
                self.branch.output, self.trunk.output, self.latent
            )));
        }
        check_len("branch input", self.channels * self.stencil * self.stencil, self.branch.input)?;
        check_len("trunk input", 2, self.trunk.input)
    }

    pub fn param_count(&self) -> usize {
        self.branch.param_count() + self.trunk.param_count()
    }

    fn join(branch: &ParamVector, trunk: &ParamVector) -> ParamVector {
        let mut pv = ParamVector::new();
        pv.extend_prefixed("branch.", branch);
        pv.extend_prefixed("trunk.", trunk);
        pv
    }

    pub fn init<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let b = self.branch.init(rng);
        let t = self.trunk.init(rng);
        Self::join(&b, &t)
    }

    pub fn zeros(&self) -> ParamVector {
        Self::join(&self.branch.zeros(), &self.trunk.zeros())
    }

    /// Pooling factor for a grid, or an error if the grid does not reduce to
    /// the configured stencil.
    pub fn pool_factor(&self, channels: usize, ny: usize, nx: usize) -> Result<usize> {
        if channels != self.channels {
            return Err(Error::Shape(format!(
                "field has {channels} channels, functional expects {}",
                self.channels
            )));
        }
        if ny % self.stencil != 0 || nx % self.stencil != 0 || ny / self.stencil != nx / self.stencil {
            return Err(Error::Shape(format!(
                "{ny}x{nx} grid does not pool evenly to a {0}x{0} stencil",
                self.stencil
            )));
        }
        Ok(ny / self.stencil)
    }

    /// Records `H(z)` for a field node `z` laid out like [`FieldState::data`].
    pub fn record(
        &self,
        tape: &mut Tape,
        leaves: &[Var],
        z: Var,
        ny: usize,
        nx: usize,
        cell_area: f64,
    ) -> Result<Var> {
        let factor = self.pool_factor(self.channels, ny, nx)?;
        check_len("field node", self.channels * ny * nx, tape.len_of(z))?;
        let nb = 2 * self.branch.layers();
        check_len("DeepONet leaves", nb + 2 * self.trunk.layers(), leaves.len())?;
        let pooled = if factor == 1 {
            z
        } else {
            tape.avg_pool(z, self.channels, ny, nx, factor)
        };
        let b = self.branch.record(tape, &leaves[..nb], pooled);
        let mut acc: Option<Var> = None;
        for j in 0..ny {
            for i in 0..nx {
                let xy = tape.constant(&[i as f64 / nx as f64, j as f64 / ny as f64]);
                let t = self.trunk.record(tape, &leaves[nb..], xy);
                acc = Some(match acc {
                    None => t,
                    Some(a) => tape.add(a, t),
                });
            }
        }
        let tsum = acc.ok_or_else(|| Error::Shape("empty grid".into()))?;
        let inner = tape.dot(b, tsum);
        let area = tape.constant(&[cell_area]);
        Ok(tape.scale(inner, area))
    }

    /// `H(z)` together with `∇_z H`.
    pub fn energy_and_grad(&self, params: &ParamVector, field: &FieldState) -> Result<(f64, Vec<f64>)> {
        check_len("DeepONet parameters", self.param_count(), params.len())?;
        let mut tape = Tape::new();
        let leaves = params.record_const(&mut tape);
        let z = tape.input(&field.data);
        let h = self.record(&mut tape, &leaves.vars, z, field.ny, field.nx, field.cell_area())?;
        tape.set_output(h);
        let adj = tape.adjoints()?;
        Ok((tape.scalar(h), adj.of(z).to_vec()))
    }

    pub fn energy(&self, params: &ParamVector, field: &FieldState) -> Result<f64> {
        Ok(self.energy_and_grad(params, field)?.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_field(seed: u64, c: usize, n: usize) -> FieldState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..c * n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        FieldState::from_data(c, n, n, 0.5, 0.25, data).unwrap()
    }

    #[test]
    fn zero_branch_output_annihilates_energy() {
        let spec = DeepOnetSpec::new(2, 4, 3, &[5], &[5], Activation::Tanh).unwrap();
        let mut pv = spec.init(&mut ChaCha8Rng::seed_from_u64(1));
        pv.slice_mut("branch.w1").unwrap().fill(0.0);
        pv.slice_mut("branch.b1").unwrap().fill(0.0);
        let f = random_field(2, 2, 8);
        assert_eq!(spec.energy(&pv, &f).unwrap(), 0.0);
    }

    #[test]
    fn constant_branch_and_trunk_on_two_by_two_grid() {
        let spec = DeepOnetSpec::new(1, 2, 2, &[3], &[3], Activation::Tanh).unwrap();
        let mut pv = spec.zeros();
        pv.slice_mut("branch.b1").unwrap().copy_from_slice(&[1.5, -0.5]);
        pv.slice_mut("trunk.b1").unwrap().copy_from_slice(&[2.0, 3.0]);
        let f = FieldState::from_data(1, 2, 2, 1.0, 1.0, alloc::vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let inner = 1.5 * 2.0 - 0.5 * 3.0;
        assert_eq!(spec.energy(&pv, &f).unwrap(), 4.0 * inner);
    }

    #[test]
    fn grid_not_matching_stencil_is_rejected() {
        let spec = DeepOnetSpec::new(1, 4, 2, &[3], &[3], Activation::Tanh).unwrap();
        let f = FieldState::zeros(1, 6, 6, 1.0, 1.0);
        assert!(spec.energy(&spec.zeros(), &f).is_err());
        let wrong_channels = FieldState::zeros(2, 8, 8, 1.0, 1.0);
        assert!(spec.energy(&spec.zeros(), &wrong_channels).is_err());
    }

    #[test]
    fn cell_gradient_matches_central_difference() {
        let spec = DeepOnetSpec::new(2, 4, 4, &[6], &[6], Activation::Softplus).unwrap();
        let pv = spec.init(&mut ChaCha8Rng::seed_from_u64(7));
        let f = random_field(8, 2, 8);
        let (_, grad) = spec.energy_and_grad(&pv, &f).unwrap();
        let h = 1e-5;
        for &cell in &[0usize, 17, 63, 64, 101, 127] {
            let mut fp = f.clone();
            fp.data[cell] += h;
            let mut fm = f.clone();
            fm.data[cell] -= h;
            let fd = (spec.energy(&pv, &fp).unwrap() - spec.energy(&pv, &fm).unwrap()) / (2.0 * h);
            let rel = (grad[cell] - fd).abs() / fd.abs().max(1e-8);
            assert!(rel < 1e-6, "cell {cell}: {} vs {fd} (rel {rel:e})", grad[cell]);
        }
    }
}
