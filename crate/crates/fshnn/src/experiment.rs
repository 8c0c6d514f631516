//! Generation, model construction, training, rollout and scoring driven by
//! an [`ExperimentConfig`].

use fshnn_core::dataset::{StateLayout, Trajectory, TrajectoryDataset};
use fshnn_core::models::{FsHnnOdeModel, FsHnnPdeModel, HnnModel, MlpDynamicsModel, Model};
use fshnn_core::systems::{generate_dataset, stream_rng, System};
use fshnn_core::train::{
    evaluate, train_fs_hnn_ode, train_fs_hnn_pde, train_hnn, train_mlp, LossHistory, MetricReport,
};
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Family};
use crate::Failure;

const INIT_STREAM: u64 = 4 << 32;

pub fn generate(cfg: &ExperimentConfig) -> Result<TrajectoryDataset, Failure> {
    Ok(generate_dataset(&cfg.system, &cfg.generation)?)
}

/// A freshly initialised model for the dataset's state layout. The
/// initialisation depends only on the training seed and the architecture.
pub fn build_model(cfg: &ExperimentConfig, data: &TrajectoryDataset) -> Result<Model, Failure> {
    let m = &cfg.model;
    let mut rng = stream_rng(cfg.training.seed, INIT_STREAM);
    Ok(match (data.layout, m.family) {
        (StateLayout::Phase { dof }, Family::Hnn) => {
            Model::Hnn { model: HnnModel::new(dof, &m.hidden, m.activation, &mut rng)?, dt: data.frame_dt }
        }
        (StateLayout::Phase { dof }, Family::FsHnn) => Model::FsHnnOde {
            model: FsHnnOdeModel::new(dof, &m.intervals, &m.hidden, &m.combiner_hidden, m.activation, &mut rng)?,
            dt: data.frame_dt,
        },
        (StateLayout::Phase { dof }, Family::Mlp) => {
            let interval = m.intervals[0];
            Model::Mlp {
                model: MlpDynamicsModel::new(2 * dof, &m.hidden, m.activation, interval, &mut rng)?,
                frame_dt: data.frame_dt * interval as f64,
            }
        }
        (StateLayout::Field { channels, ny, nx, .. }, Family::FsHnn) => Model::FsHnnPde {
            model: FsHnnPdeModel::new(channels, ny, nx, &m.intervals, &m.pde, data.frame_dt, &mut rng)?,
        },
        (StateLayout::Field { .. }, f) => {
            return Err(Failure::Config(format!("{f:?} models are not available for field data")));
        }
    })
}

pub fn train_model(cfg: &ExperimentConfig, model: &mut Model, data: &TrajectoryDataset) -> Result<LossHistory, Failure> {
    let t = &cfg.training;
    Ok(match model {
        Model::Hnn { model, .. } => train_hnn(model, data, t)?,
        Model::FsHnnOde { model, .. } => train_fs_hnn_ode(model, data, t)?,
        Model::FsHnnPde { model } => train_fs_hnn_pde(model, data, t)?,
        Model::Mlp { model, .. } => train_mlp(model, data, t)?,
    })
}

/// Table row label for a model trained at `intervals`.
pub fn resolution_label(intervals: &[usize]) -> String {
    match intervals {
        [1] => "High".into(),
        [2] => "Med".into(),
        [3] => "Low".into(),
        [i] => format!("I={i}"),
        _ => "Com.".into(),
    }
}

/// Intervals a model was trained on, as used for its label.
pub fn model_intervals(model: &Model, cfg_intervals: &[usize]) -> Vec<usize> {
    match model {
        Model::FsHnnOde { model, .. } => model.intervals.clone(),
        Model::FsHnnPde { model } => model.intervals.clone(),
        Model::Mlp { model, .. } => vec![model.interval],
        Model::Hnn { .. } => cfg_intervals.to_vec(),
    }
}

/// Model rollouts from the first frame of the leading trajectories.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollouts {
    pub layout: StateLayout,
    pub frame_dt: f64,
    pub trajs: Vec<Trajectory>,
    pub diverged_at: Vec<Option<usize>>,
}

pub fn rollout_model(model: &Model, data: &TrajectoryDataset, n_steps: usize, n_traj: usize) -> Result<Rollouts, Failure> {
    model.validate()?;
    if n_traj == 0 || n_traj > data.n_traj {
        return Err(Failure::Config(format!("cannot roll out {n_traj} of {} trajectories", data.n_traj)));
    }
    let mut trajs = Vec::with_capacity(n_traj);
    let mut diverged_at = Vec::with_capacity(n_traj);
    for i in 0..n_traj {
        let out = model.rollout(data.frame(i, 0), n_steps, &data.layout)?;
        trajs.push(out.traj);
        diverged_at.push(out.diverged_at);
    }
    Ok(Rollouts { layout: data.layout, frame_dt: model.frame_dt(), trajs, diverged_at })
}

impl Rollouts {
    /// Rectangular dataset; frames after a divergence are NaN.
    pub fn to_dataset(&self) -> Result<TrajectoryDataset, Failure> {
        let n = self.trajs.iter().map(Trajectory::n_frames).max().unwrap_or(0);
        let dim = self.layout.dim();
        let mut padded = Vec::with_capacity(self.trajs.len());
        for t in &self.trajs {
            let mut p = t.clone();
            let nan = vec![f64::NAN; dim];
            for k in t.n_frames()..n {
                p.push(k as f64 * self.frame_dt, &nan);
            }
            padded.push(p);
        }
        let energy = vec![f64::NAN; padded.len() * n];
        Ok(TrajectoryDataset::from_trajectories(self.layout, self.frame_dt, &padded, energy)?)
    }

    /// Inverse of [`Rollouts::to_dataset`].
    pub fn from_dataset(ds: &TrajectoryDataset, diverged_at: Vec<Option<usize>>) -> Result<Self, Failure> {
        if diverged_at.len() != ds.n_traj {
            return Err(Failure::Config("divergence list does not match the trajectory count".into()));
        }
        let trajs = (0..ds.n_traj)
            .map(|i| {
                let full = ds.trajectory(i);
                let keep = diverged_at[i].map_or(full.n_frames(), |s| s + 1);
                let mut t = Trajectory::new(full.dim);
                for k in 0..keep {
                    t.push(full.times[k], full.frame(k));
                }
                t
            })
            .collect();
        Ok(Self { layout: ds.layout, frame_dt: ds.frame_dt, trajs, diverged_at })
    }
}

/// Aggregate metrics over several rollouts plus the per-trajectory errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    /// Mean over trajectories; curves are averaged frame by frame over the
    /// trajectories that reach each frame. `diverged_at` is the earliest
    /// divergence.
    pub report: MetricReport,
    pub per_traj_mse: Vec<f64>,
    pub n_diverged: usize,
}

impl Evaluation {
    /// Rollout MSE, or infinity when any rollout diverged.
    pub fn score(&self) -> f64 {
        if self.n_diverged > 0 {
            f64::INFINITY
        } else {
            self.report.rollout_mse
        }
    }
}

/// Frames of `truth` at the prediction's frame spacing.
fn aligned_truth(truth: &TrajectoryDataset, traj: usize, frame_dt: f64, n_frames: usize) -> Result<Trajectory, Failure> {
    let ratio = frame_dt / truth.frame_dt;
    let r = ratio.round();
    if r < 1.0 || (ratio - r).abs() > 1e-6 * ratio {
        return Err(Failure::Config(format!(
            "prediction spacing {frame_dt} is not a multiple of the truth spacing {}",
            truth.frame_dt
        )));
    }
    let r = r as usize;
    if (n_frames - 1) * r >= truth.n_frames {
        return Err(Failure::Config(format!(
            "truth has {} frames, the prediction needs {}",
            truth.n_frames,
            (n_frames - 1) * r + 1
        )));
    }
    let mut t = Trajectory::new(truth.dim());
    for k in 0..n_frames {
        t.push(truth.times[traj * truth.n_frames + k * r] - truth.times[traj * truth.n_frames], truth.frame(traj, k * r));
    }
    Ok(t)
}

pub fn score(pred: &Rollouts, truth: &TrajectoryDataset, energy: Option<&System>) -> Result<Evaluation, Failure> {
    if pred.layout != truth.layout {
        return Err(Failure::Config("prediction and truth layouts differ".into()));
    }
    if pred.trajs.len() > truth.n_traj {
        return Err(Failure::Config("more predicted trajectories than truth trajectories".into()));
    }
    let energy_fn = energy.map(|s| move |z: &[f64]| s.frame_energy(z));
    let mut reports = Vec::new();
    for (i, (p, d)) in pred.trajs.iter().zip(&pred.diverged_at).enumerate() {
        let t = aligned_truth(truth, i, pred.frame_dt, p.n_frames())?;
        let e = energy_fn.as_ref().map(|f| f as &dyn Fn(&[f64]) -> fshnn_core::Result<f64>);
        reports.push(evaluate(p, &t, e, *d)?);
    }
    Ok(aggregate(reports))
}

fn mean_curves(curves: &[&Vec<f64>]) -> Vec<f64> {
    let n = curves.iter().map(|c| c.len()).max().unwrap_or(0);
    (0..n)
        .map(|k| {
            let vals: Vec<f64> = curves.iter().filter_map(|c| c.get(k).copied()).collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect()
}

fn aggregate(reports: Vec<MetricReport>) -> Evaluation {
    let per_traj_mse: Vec<f64> = reports.iter().map(|r| r.rollout_mse).collect();
    let n_diverged = reports.iter().filter(|r| r.diverged_at.is_some()).count();
    let longest = reports.iter().max_by_key(|r| r.times.len()).map(|r| r.times.clone()).unwrap_or_default();
    let mse_curve = mean_curves(&reports.iter().map(|r| &r.mse_curve).collect::<Vec<_>>());
    let energy: Vec<&Vec<f64>> = reports.iter().filter_map(|r| r.energy_deviation.as_ref()).collect();
    let energy_deviation = if energy.is_empty() { None } else { Some(mean_curves(&energy)) };
    let report = MetricReport {
        rollout_mse: per_traj_mse.iter().sum::<f64>() / per_traj_mse.len().max(1) as f64,
        times: longest,
        mse_curve,
        energy_deviation,
        energy_absolute: reports.iter().any(|r| r.energy_absolute),
        diverged_at: reports.iter().filter_map(|r| r.diverged_at).min(),
    };
    Evaluation { report, per_traj_mse, n_diverged }
}
