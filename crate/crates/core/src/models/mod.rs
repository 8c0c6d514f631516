//! Learnable dynamics: HNN, FS-HNN for phase space and for fields, and a
//! black-box MLP baseline.

mod combiner;
mod hnn;
mod mlp;
mod pde;

pub use combiner::Combiner;
pub use hnn::{FsHnnOdeModel, HnnModel};
pub use mlp::MlpDynamicsModel;
pub use pde::{project_orthogonal, record_projection, ChannelNorm, FieldComponent, FsHnnPdeModel, Increment, PdeArch};

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::autodiff::{ParamLeaves, ParamVector, Tape, Var};
use crate::dataset::Trajectory;
use crate::error::{Error, Result};
use crate::integrators::rk4_step;
use crate::state::{apply_canonical_j, FieldState};

/// A learned Hamiltonian on phase space.
pub trait PhaseHamiltonian {
    fn dof(&self) -> usize;

    /// Parameter groups in a fixed order.
    fn groups(&self) -> Vec<&ParamVector>;

    fn groups_mut(&mut self) -> Vec<&mut ParamVector>;

    /// Records `H(z)` given one set of leaves per group.
    fn record(&self, tape: &mut Tape, leaves: &[ParamLeaves], z: Var) -> Result<Var>;

    /// `H(z)` and `∇_z H(z)`.
    fn energy_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn energy(&self, z: &[f64]) -> Result<f64> {
        Ok(self.energy_and_grad(z)?.0)
    }

    /// Records every group, as trainable leaves where `trainable[i]` holds.
    fn record_groups(&self, tape: &mut Tape, trainable: &[bool]) -> Vec<ParamLeaves> {
        self.groups()
            .iter()
            .enumerate()
            .map(|(i, g)| if trainable.get(i).copied().unwrap_or(false) { g.record(tape) } else { g.record_const(tape) })
            .collect()
    }
}

/// `ż = J ∇H(z)` with the canonical `J`.
pub fn hamiltonian_vector_field<H: PhaseHamiltonian + ?Sized>(model: &H, z: &[f64]) -> Result<Vec<f64>> {
    crate::error::check_len("phase state", 2 * model.dof(), z.len())?;
    let (_, g) = model.energy_and_grad(z)?;
    let mut out = vec![0.0; z.len()];
    apply_canonical_j(&g, &mut out);
    Ok(out)
}

/// The energy `C(M_1(z), …, M_K(z))`.
pub fn multiscale_hamiltonian(model: &FsHnnOdeModel, z: &[f64]) -> Result<f64> {
    model.energy(z)
}

/// A rollout that stops at the first non-finite state. `diverged_at` is the
/// step that produced it; `traj` holds every finite frame before it.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutOutcome {
    pub traj: Trajectory,
    pub diverged_at: Option<usize>,
}

impl RolloutOutcome {
    pub fn into_result(self) -> Result<Trajectory> {
        match self.diverged_at {
            Some(step) => Err(Error::Diverged { step }),
            None => Ok(self.traj),
        }
    }
}

fn run<S>(z0: &[f64], n_steps: usize, dt: f64, mut step: S) -> Result<RolloutOutcome>
where
    S: FnMut(&mut Vec<f64>) -> Result<()>,
{
    let mut traj = Trajectory::new(z0.len());
    let mut z = z0.to_vec();
    traj.push(0.0, &z);
    for n in 0..n_steps {
        let ok = match step(&mut z) {
            Ok(()) => z.iter().all(|v| v.is_finite()),
            Err(Error::NonFinite { .. } | Error::NonFiniteForce | Error::DepthBelowFloor { .. }) => false,
            Err(e) => return Err(e),
        };
        if !ok {
            return Ok(RolloutOutcome { traj, diverged_at: Some(n) });
        }
        traj.push((n + 1) as f64 * dt, &z);
    }
    Ok(RolloutOutcome { traj, diverged_at: None })
}

/// RK4 on `ż = J∇H` with a frame per step.
pub fn ode_rollout<H: PhaseHamiltonian + ?Sized>(model: &H, z0: &[f64], n_steps: usize, dt: f64) -> Result<RolloutOutcome> {
    let f = |z: &[f64], _t: f64, out: &mut [f64]| -> Result<()> {
        out.copy_from_slice(&hamiltonian_vector_field(model, z)?);
        Ok(())
    };
    run(z0, n_steps, dt, |z| rk4_step(&f, z, 0.0, dt))
}

/// Iterates the learned field step; frames are `dt_model` apart.
pub fn pde_rollout(model: &FsHnnPdeModel, z0: &FieldState, n_steps: usize) -> Result<RolloutOutcome> {
    let shape = z0.clone();
    run(&z0.data, n_steps, model.dt_model, |z| {
        let mut s = shape.clone();
        s.data.copy_from_slice(z);
        *z = model.step(&s)?.data;
        Ok(())
    })
}

/// Iterates the direct map; frames are `frame_dt` apart.
pub fn mlp_rollout(model: &MlpDynamicsModel, z0: &[f64], n_steps: usize, frame_dt: f64) -> Result<RolloutOutcome> {
    run(z0, n_steps, frame_dt, |z| {
        *z = model.step(z)?;
        Ok(())
    })
}

/// Any trained model, as stored in a checkpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Model {
    Hnn { model: HnnModel, dt: f64 },
    FsHnnOde { model: FsHnnOdeModel, dt: f64 },
    FsHnnPde { model: FsHnnPdeModel },
    Mlp { model: MlpDynamicsModel, frame_dt: f64 },
}

impl Model {
    /// Named parameter groups, in a stable order.
    pub fn named_groups(&self) -> Vec<(alloc::string::String, &ParamVector)> {
        use alloc::format;
        match self {
            Model::Hnn { model, .. } => vec![("hnn".into(), &model.params)],
            Model::FsHnnOde { model, .. } => {
                let mut v: Vec<_> =
                    model.components.iter().enumerate().map(|(i, c)| (format!("component.{i}"), &c.params)).collect();
                v.push(("combiner".into(), &model.combiner.params));
                v
            }
            Model::FsHnnPde { model } => {
                let mut v: Vec<_> =
                    model.components.iter().enumerate().map(|(i, c)| (format!("component.{i}"), &c.params)).collect();
                v.push(("combiner".into(), &model.combiner.params));
                v.push(("operator".into(), &model.operator));
                v.extend(model.component_operators.iter().enumerate().map(|(i, o)| (format!("operator.{i}"), o)));
                v
            }
            Model::Mlp { model, .. } => vec![("mlp".into(), &model.params)],
        }
    }

    pub fn groups_mut(&mut self) -> Vec<&mut ParamVector> {
        match self {
            Model::Hnn { model, .. } => vec![&mut model.params],
            Model::FsHnnOde { model, .. } => model.groups_mut(),
            Model::FsHnnPde { model } => {
                let FsHnnPdeModel { components, combiner, operator, component_operators, .. } = model;
                let mut g: Vec<&mut ParamVector> = components.iter_mut().map(|c| &mut c.params).collect();
                g.push(&mut combiner.params);
                g.push(operator);
                g.extend(component_operators.iter_mut());
                g
            }
            Model::Mlp { model, .. } => vec![&mut model.params],
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Hnn { model, .. } => model.validate(),
            Model::FsHnnOde { model, .. } => model.validate(),
            Model::FsHnnPde { model } => model.validate(),
            Model::Mlp { model, .. } => model.validate(),
        }
    }

    /// Time between consecutive rollout frames.
    pub fn frame_dt(&self) -> f64 {
        match self {
            Model::Hnn { dt, .. } | Model::FsHnnOde { dt, .. } => *dt,
            Model::FsHnnPde { model } => model.dt_model,
            Model::Mlp { frame_dt, .. } => *frame_dt,
        }
    }

    /// The single-scale model `k` of an FS-HNN, rolled out on its own.
    pub fn component(&self, k: usize) -> Result<Model> {
        let bad = || Error::InvalidParameter(alloc::format!("model has no component {k}"));
        match self {
            Model::FsHnnOde { model, dt } => {
                let c = model.components.get(k).ok_or_else(bad)?;
                Ok(Model::Hnn { model: c.clone(), dt: *dt })
            }
            Model::FsHnnPde { model } => {
                if k >= model.components.len() {
                    return Err(bad());
                }
                Ok(Model::FsHnnPde { model: model.single_component(k) })
            }
            _ => Err(bad()),
        }
    }

    /// Rolls out `n_steps` frames from a flat state.
    pub fn rollout(&self, z0: &[f64], n_steps: usize, layout: &crate::dataset::StateLayout) -> Result<RolloutOutcome> {
        match self {
            Model::Hnn { model, dt } => ode_rollout(model, z0, n_steps, *dt),
            Model::FsHnnOde { model, dt } => ode_rollout(model, z0, n_steps, *dt),
            Model::FsHnnPde { model } => pde_rollout(model, &layout.field(z0)?, n_steps),
            Model::Mlp { model, frame_dt } => mlp_rollout(model, z0, n_steps, *frame_dt),
        }
    }

    /// Learned energy, where the model has one.
    pub fn energy(&self, z: &[f64]) -> Option<Result<f64>> {
        match self {
            Model::Hnn { model, .. } => Some(model.energy(z)),
            Model::FsHnnOde { model, .. } => Some(model.energy(z)),
            Model::FsHnnPde { model } => Some(model.energy(z)),
            Model::Mlp { .. } => None,
        }
    }
}
