use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::combiner::Combiner;
use crate::autodiff::{ParamLeaves, ParamVector, Tape, Var};
use crate::error::{check_len, Error, Result};
use crate::nn::{Activation, DeepOnetSpec, ResConvSpec};
use crate::state::{dot, FieldState};

/// Per-channel affine normalisation `(z - mean) / scale`, where `scale` is
/// the largest deviation from the mean seen in the fitting frames.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelNorm {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ChannelNorm {
    pub fn identity(channels: usize) -> Self {
        Self { mean: vec![0.0; channels], scale: vec![1.0; channels] }
    }

    /// Statistics over a set of frames; near-constant channels get unit
    /// scale.
    pub fn fit<'a>(channels: usize, plane: usize, frames: impl Iterator<Item = &'a [f64]>) -> Self {
        let frames: Vec<&[f64]> = frames.collect();
        let count = (frames.len() * plane) as f64;
        let mean: Vec<f64> = (0..channels)
            .map(|c| frames.iter().flat_map(|f| &f[c * plane..(c + 1) * plane]).sum::<f64>() / count)
            .collect();
        let scale = (0..channels)
            .map(|c| {
                let m = mean[c];
                let dev = frames
                    .iter()
                    .flat_map(|f| &f[c * plane..(c + 1) * plane])
                    .fold(0.0, |a: f64, &v| a.max(crate::math::abs(v - m)));
                if dev > 1e-12 * (1.0 + crate::math::abs(m)) { dev } else { 1.0 }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn normalize(&self, data: &[f64]) -> Vec<f64> {
        let plane = data.len() / self.mean.len();
        data.iter()
            .enumerate()
            .map(|(i, v)| {
                let c = i / plane;
                (v - self.mean[c]) / self.scale[c]
            })
            .collect()
    }

    pub fn denormalize(&self, data: &[f64]) -> Vec<f64> {
        let plane = data.len() / self.mean.len();
        data.iter()
            .enumerate()
            .map(|(i, v)| {
                let c = i / plane;
                v * self.scale[c] + self.mean[c]
            })
            .collect()
    }
}

/// `Δz = raw - (⟨g, raw⟩ / (⟨g, g⟩ + ξ)) g`.
pub fn project_orthogonal(grad: &[f64], raw: &[f64], xi: f64) -> Result<Vec<f64>> {
    check_len("projection input", grad.len(), raw.len())?;
    let coef = dot(grad, raw) / (dot(grad, grad) + xi);
    Ok(raw.iter().zip(grad).map(|(r, g)| r - coef * g).collect())
}

/// Tape version of [`project_orthogonal`].
pub fn record_projection(tape: &mut Tape, grad: Var, raw: Var, xi: f64) -> Var {
    let gr = tape.dot(grad, raw);
    let gg = tape.dot(grad, grad);
    let xi = tape.constant(&[xi]);
    let den = tape.add(gg, xi);
    let inv = tape.recip(den);
    let coef = tape.mul(gr, inv);
    let along = tape.scale(grad, coef);
    tape.sub(raw, along)
}

/// One DeepONet energy functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldComponent {
    pub spec: DeepOnetSpec,
    pub params: ParamVector,
}

/// FS-HNN for fields. States are normalised per channel, the Hamiltonian is
/// `C(M_1, …, M_K)` over DeepONet functionals on the unit square, and one
/// step is `z + s·P(𝒥_θ(∇H(z)))` with `P` the orthogonal projection and `s`
/// the number of `dt_model` increments taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FsHnnPdeModel {
    pub channels: usize,
    pub ny: usize,
    pub nx: usize,
    pub components: Vec<FieldComponent>,
    pub intervals: Vec<usize>,
    pub combiner: Combiner,
    pub operator_spec: ResConvSpec,
    pub operator: ParamVector,
    /// Operators fitted alongside each component during per-scale training,
    /// used when a component is rolled out on its own. Empty until trained.
    #[serde(default)]
    pub component_operators: Vec<ParamVector>,
    pub xi: f64,
    pub dt_model: f64,
    pub norm: ChannelNorm,
}

/// Sizes for building an [`FsHnnPdeModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdeArch {
    pub stencil: usize,
    pub latent: usize,
    pub branch_hidden: Vec<usize>,
    pub trunk_hidden: Vec<usize>,
    pub operator_hidden: usize,
    pub operator_depth: usize,
    pub kernel: usize,
    pub combiner_hidden: Vec<usize>,
    pub activation: Activation,
    pub xi: f64,
}

impl Default for PdeArch {
    fn default() -> Self {
        Self {
            stencil: 8,
            latent: 16,
            branch_hidden: vec![32],
            trunk_hidden: vec![16],
            operator_hidden: 8,
            operator_depth: 2,
            kernel: 3,
            combiner_hidden: vec![8],
            activation: Activation::Tanh,
            xi: 1e-8,
        }
    }
}

impl FsHnnPdeModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new<R: Rng + ?Sized>(
        channels: usize,
        ny: usize,
        nx: usize,
        intervals: &[usize],
        arch: &PdeArch,
        dt_model: f64,
        rng: &mut R,
    ) -> Result<Self> {
        let mut components = Vec::new();
        for _ in intervals {
            let spec = DeepOnetSpec::new(
                channels,
                arch.stencil,
                arch.latent,
                &arch.branch_hidden,
                &arch.trunk_hidden,
                arch.activation,
            )?;
            let params = spec.init(rng);
            components.push(FieldComponent { spec, params });
        }
        let combiner = Combiner::new(intervals.len(), &arch.combiner_hidden, arch.activation, rng)?;
        let operator_spec = ResConvSpec {
            channels,
            hidden: arch.operator_hidden,
            depth: arch.operator_depth,
            kernel: arch.kernel,
            activation: arch.activation,
        };
        let operator = operator_spec.init(rng);
        let model = Self {
            channels,
            ny,
            nx,
            components,
            intervals: intervals.to_vec(),
            combiner,
            operator_spec,
            operator,
            component_operators: Vec::new(),
            xi: arch.xi,
            dt_model,
            norm: ChannelNorm::identity(channels),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.xi > 0.0) {
            return Err(Error::InvalidParameter(format!("xi {} must be positive", self.xi)));
        }
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("at least one component is required".into()));
        }
        check_len("intervals", self.components.len(), self.intervals.len())?;
        if self.intervals[0] == 0 || self.intervals.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidParameter("intervals must be positive and strictly increasing".into()));
        }
        check_len("combiner width", self.components.len(), self.combiner.k)?;
        for c in &self.components {
            c.spec.validate()?;
            c.spec.pool_factor(self.channels, self.ny, self.nx)?;
            check_len("component parameters", c.spec.param_count(), c.params.len())?;
        }
        self.operator_spec.validate()?;
        check_len("operator channels", self.channels, self.operator_spec.channels)?;
        check_len("operator parameters", self.operator_spec.param_count(), self.operator.len())?;
        for op in &self.component_operators {
            check_len("component operator parameters", self.operator_spec.param_count(), op.len())?;
        }
        check_len("normalisation", self.channels, self.norm.mean.len())?;
        self.combiner.validate()
    }

    pub fn dim(&self) -> usize {
        self.channels * self.ny * self.nx
    }

    /// Cell area of the unit-square grid the functionals see.
    pub fn cell_area(&self) -> f64 {
        1.0 / (self.ny * self.nx) as f64
    }

    /// Hamiltonian parameter groups (components then combiner).
    pub fn h_groups(&self) -> Vec<&ParamVector> {
        let mut g: Vec<&ParamVector> = self.components.iter().map(|c| &c.params).collect();
        g.push(&self.combiner.params);
        g
    }

    pub fn h_groups_mut(&mut self) -> Vec<&mut ParamVector> {
        let mut g: Vec<&mut ParamVector> = self.components.iter_mut().map(|c| &mut c.params).collect();
        g.push(&mut self.combiner.params);
        g
    }

    /// Records `H` of a normalised field node.
    pub fn record_h(&self, tape: &mut Tape, leaves: &[ParamLeaves], z: Var) -> Result<Var> {
        let k = self.components.len();
        check_len("Hamiltonian parameter groups", k + 1, leaves.len())?;
        let area = self.cell_area();
        let mut ms = Vec::with_capacity(k);
        for (c, l) in self.components.iter().zip(leaves) {
            ms.push(c.spec.record(tape, &l.vars, z, self.ny, self.nx, area)?);
        }
        let m = tape.concat(&ms);
        Ok(self.combiner.record(tape, &leaves[k].vars, m))
    }

    /// `H` and `∇H` at a normalised state.
    pub fn energy_and_grad_normalized(&self, zn: &[f64]) -> Result<(f64, Vec<f64>)> {
        check_len("field", self.dim(), zn.len())?;
        let mut tape = Tape::new();
        let leaves: Vec<ParamLeaves> = self.h_groups().iter().map(|g| g.record_const(&mut tape)).collect();
        let z = tape.input(zn);
        let h = self.record_h(&mut tape, &leaves, z)?;
        tape.set_output(h);
        let adj = tape.adjoints()?;
        Ok((tape.scalar(h), adj.of(z).to_vec()))
    }

    /// Learned energy of a physical-unit state.
    pub fn energy(&self, z: &[f64]) -> Result<f64> {
        Ok(self.energy_and_grad_normalized(&self.norm.normalize(z))?.0)
    }

    fn check_field(&self, z: &FieldState) -> Result<()> {
        if z.channels != self.channels || z.ny != self.ny || z.nx != self.nx {
            return Err(Error::Shape(format!(
                "model grid is {}x{}x{}, state is {}x{}x{}",
                self.channels, self.ny, self.nx, z.channels, z.ny, z.nx
            )));
        }
        Ok(())
    }

    /// Raw operator output and projected increment at a normalised state,
    /// along with `∇H`.
    pub fn increment_normalized(&self, zn: &[f64]) -> Result<Increment> {
        let (_, grad) = self.energy_and_grad_normalized(zn)?;
        let g = FieldState::from_data(self.channels, self.ny, self.nx, 1.0, 1.0, grad)?;
        let raw = self.operator_spec.forward(&self.operator, &g)?.data;
        let delta = project_orthogonal(&g.data, &raw, self.xi)?;
        Ok(Increment { grad: g.data, raw, delta })
    }

    /// One model step of length `dt_model`.
    pub fn step(&self, z: &FieldState) -> Result<FieldState> {
        self.check_field(z)?;
        let zn = self.norm.normalize(&z.data);
        let inc = self.increment_normalized(&zn)?;
        let next: Vec<f64> = zn.iter().zip(&inc.delta).map(|(a, d)| a + d).collect();
        let mut out = z.clone();
        out.data = self.norm.denormalize(&next);
        Ok(out)
    }

    /// A one-component view used for per-scale training.
    pub fn single_component(&self, k: usize) -> Self {
        Self {
            components: vec![self.components[k].clone()],
            intervals: vec![self.intervals[k]],
            combiner: Combiner::summation(1),
            operator: self.component_operators.get(k).unwrap_or(&self.operator).clone(),
            component_operators: Vec::new(),
            ..self.clone()
        }
    }
}

/// Quantities of one operator application.
#[derive(Debug, Clone, PartialEq)]
pub struct Increment {
    pub grad: Vec<f64>,
    pub raw: Vec<f64>,
    pub delta: Vec<f64>,
}
