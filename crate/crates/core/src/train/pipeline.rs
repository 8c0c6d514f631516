use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::data::{gradient_samples, pairs, subsample, Pair, Sample};
use super::loss::{hnn_grad_loss, mlp_onestep_loss, pde_onestep_loss, PdeTrainable};
use super::{adam_step, AdamConfig, AdamState, LossKind, TrainConfig};
use crate::autodiff::ParamVector;
use crate::dataset::TrajectoryDataset;
use crate::error::{check_len, Error, Result};
use crate::models::{ChannelNorm, FsHnnOdeModel, FsHnnPdeModel, HnnModel, MlpDynamicsModel, PhaseHamiltonian};
use crate::systems::stream_rng;

const SHUFFLE_STREAM: u64 = 2 << 32;
const PHASE2_STREAM: u64 = SHUFFLE_STREAM + (1 << 16);

/// Mean training loss of one epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub phase: u8,
    /// Component index in phase 1.
    pub component: Option<usize>,
    pub epoch: usize,
    pub loss: f64,
}

pub type LossHistory = Vec<LossRecord>;

struct Optimizer {
    cfg: AdamConfig,
    states: Vec<AdamState>,
}

impl Optimizer {
    fn new(cfg: AdamConfig, groups: &[&ParamVector]) -> Self {
        Self { cfg, states: groups.iter().map(|g| AdamState::new(g.len())).collect() }
    }

    /// Applies one update per group with a non-empty gradient.
    fn apply(&mut self, groups: Vec<&mut ParamVector>, grads: &[Vec<f64>]) {
        for ((g, grad), st) in groups.into_iter().zip(grads).zip(&mut self.states) {
            if !grad.is_empty() {
                adam_step(&mut g.values, grad, st, &self.cfg);
            }
        }
    }
}

struct Epochs<'a> {
    epochs: usize,
    batch: usize,
    phase: u8,
    component: Option<usize>,
    rng: ChaCha8Rng,
    history: &'a mut LossHistory,
}

impl Epochs<'_> {
    /// Shuffled minibatch passes; `step` returns the batch loss before its
    /// update.
    fn run<T>(mut self, items: &mut [T], mut step: impl FnMut(&[T]) -> Result<f64>) -> Result<()> {
        if items.is_empty() {
            return Err(Error::EmptyBatch);
        }
        for epoch in 0..self.epochs {
            items.shuffle(&mut self.rng);
            let mut total = 0.0;
            for chunk in items.chunks(self.batch) {
                let l = match step(chunk) {
                    Err(Error::NonFinite { .. }) => f64::NAN,
                    r => r?,
                };
                if !l.is_finite() {
                    return Err(Error::NonFiniteLoss { phase: self.phase, epoch });
                }
                total += l * chunk.len() as f64;
            }
            self.history.push(LossRecord {
                phase: self.phase,
                component: self.component,
                epoch,
                loss: total / items.len() as f64,
            });
        }
        Ok(())
    }
}

fn training_window(data: &TrajectoryDataset, window: usize) -> Result<TrajectoryDataset> {
    data.validate()?;
    data.truncate_frames((window + 1).min(data.n_frames))
}

fn fit_hamiltonian<H: PhaseHamiltonian>(
    model: &mut H,
    trainable: &[bool],
    samples: &mut [Sample],
    cfg: &TrainConfig,
    epochs: Epochs<'_>,
) -> Result<()> {
    let mut opt = Optimizer::new(cfg.adam(), &model.groups());
    epochs.run(samples, |batch| {
        let lg = hnn_grad_loss(&*model, trainable, batch)?;
        if lg.loss.is_finite() {
            opt.apply(model.groups_mut(), &lg.grads);
        }
        Ok(lg.loss)
    })
}

/// Two-phase FS-HNN training on phase-space data. Phase 1 fits component
/// `k` alone on the window subsampled at `I_k`; phase 2 fits the combiner
/// (and, unless frozen, the components) on the full-resolution window.
pub fn train_fs_hnn_ode(model: &mut FsHnnOdeModel, data: &TrajectoryDataset, cfg: &TrainConfig) -> Result<LossHistory> {
    model.validate()?;
    cfg.validate(model.k())?;
    if cfg.intervals != model.intervals {
        return Err(Error::InvalidParameter("training intervals differ from the model's".into()));
    }
    check_len("dataset dimension", 2 * model.dof, data.dim())?;
    cfg.expect_loss(1, LossKind::GradientMatching)?;
    let window = training_window(data, cfg.window)?;
    let mut history = LossHistory::new();
    for k in 0..model.k() {
        let mut samples = gradient_samples(&subsample(&window, cfg.intervals[k])?)?;
        let epochs = Epochs {
            epochs: cfg.epochs_phase1,
            batch: cfg.batch_size,
            phase: 1,
            component: Some(k),
            rng: stream_rng(cfg.seed, SHUFFLE_STREAM + k as u64),
            history: &mut history,
        };
        fit_hamiltonian(&mut model.components[k], &[true], &mut samples, cfg, epochs)?;
    }
    if cfg.epochs_phase2 > 0 {
        cfg.expect_loss(2, LossKind::GradientMatching)?;
        let mut samples = gradient_samples(&window)?;
        let mut trainable = vec![!cfg.freeze_components; model.k()];
        trainable.push(true);
        let epochs = Epochs {
            epochs: cfg.epochs_phase2,
            batch: cfg.batch_size,
            phase: 2,
            component: None,
            rng: stream_rng(cfg.seed, PHASE2_STREAM),
            history: &mut history,
        };
        fit_hamiltonian(model, &trainable, &mut samples, cfg, epochs)?;
    }
    Ok(history)
}

/// Plain HNN on the union of the window subsampled at every interval in
/// `cfg.intervals`, for `epochs_phase1 + epochs_phase2` epochs. With one
/// interval and no phase 2 this is exactly phase 1 of [`train_fs_hnn_ode`].
pub fn train_hnn(model: &mut HnnModel, data: &TrajectoryDataset, cfg: &TrainConfig) -> Result<LossHistory> {
    model.validate()?;
    cfg.validate(cfg.intervals.len())?;
    check_len("dataset dimension", 2 * model.dof, data.dim())?;
    cfg.expect_loss(1, LossKind::GradientMatching)?;
    let window = training_window(data, cfg.window)?;
    let mut samples = Vec::new();
    for &i in &cfg.intervals {
        samples.extend(gradient_samples(&subsample(&window, i)?)?);
    }
    let mut history = LossHistory::new();
    let epochs = Epochs {
        epochs: cfg.epochs_phase1 + cfg.epochs_phase2,
        batch: cfg.batch_size,
        phase: 1,
        component: Some(0),
        rng: stream_rng(cfg.seed, SHUFFLE_STREAM),
        history: &mut history,
    };
    fit_hamiltonian(model, &[true], &mut samples, cfg, epochs)?;
    Ok(history)
}

fn normalized(ds: &TrajectoryDataset, norm: &ChannelNorm) -> TrajectoryDataset {
    let mut out = ds.clone();
    let d = ds.dim();
    for (dst, src) in out.states.chunks_mut(d).zip(ds.states.chunks(d)) {
        dst.copy_from_slice(&norm.normalize(src));
    }
    out
}

fn fit_field(
    model: &mut FsHnnPdeModel,
    trainable: &PdeTrainable,
    items: &mut [Pair],
    step_scale: f64,
    cfg: &TrainConfig,
    epochs: Epochs<'_>,
) -> Result<()> {
    let mut h_opt = Optimizer::new(cfg.adam(), &model.h_groups());
    let mut op_opt = Optimizer::new(cfg.adam(), &[&model.operator]);
    epochs.run(items, |batch| {
        let lg = pde_onestep_loss(&*model, trainable, batch, step_scale)?;
        if lg.loss.is_finite() {
            h_opt.apply(model.h_groups_mut(), &lg.h_grads);
            op_opt.apply(vec![&mut model.operator], core::slice::from_ref(&lg.operator_grad));
        }
        Ok(lg.loss)
    })
}

/// Two-phase FS-HNN training on field data with the one-step loss.
///
/// Channel statistics are fitted on the training window and the loss is
/// taken in normalised units. In phase 1 each component trains with its own
/// copy of the operator on pairs `I_k` frames apart, one pair counting as
/// `I_k` model steps. Phase 2 starts the shared operator from the finest
/// component's copy and trains it with the combiner on consecutive frames.
pub fn train_fs_hnn_pde(model: &mut FsHnnPdeModel, data: &TrajectoryDataset, cfg: &TrainConfig) -> Result<LossHistory> {
    model.validate()?;
    cfg.validate(model.components.len())?;
    if cfg.intervals != model.intervals {
        return Err(Error::InvalidParameter("training intervals differ from the model's".into()));
    }
    check_len("dataset dimension", model.dim(), data.dim())?;
    cfg.expect_loss(1, LossKind::OneStep)?;
    let window = training_window(data, cfg.window)?;
    let plane = model.ny * model.nx;
    model.norm = ChannelNorm::fit(model.channels, plane, window.states.chunks(model.dim()));
    model.dt_model = window.frame_dt;
    let window = normalized(&window, &model.norm);

    let mut history = LossHistory::new();
    let k_total = model.components.len();
    let mut operators = Vec::with_capacity(k_total);
    for k in 0..k_total {
        let mut single = model.single_component(k);
        single.operator = model.operator.clone();
        let mut items = pairs(&subsample(&window, cfg.intervals[k])?);
        let trainable = PdeTrainable { h: vec![true, false], operator: true };
        let epochs = Epochs {
            epochs: cfg.epochs_phase1,
            batch: cfg.batch_size,
            phase: 1,
            component: Some(k),
            rng: stream_rng(cfg.seed, SHUFFLE_STREAM + k as u64),
            history: &mut history,
        };
        fit_field(&mut single, &trainable, &mut items, cfg.intervals[k] as f64, cfg, epochs)?;
        model.components[k] = single.components.swap_remove(0);
        operators.push(single.operator);
    }
    model.operator = operators[0].clone();
    model.component_operators = operators;
    if cfg.epochs_phase2 > 0 {
        cfg.expect_loss(2, LossKind::OneStep)?;
        let mut items = pairs(&window);
        let mut h = vec![!cfg.freeze_components; k_total];
        h.push(true);
        let trainable = PdeTrainable { h, operator: true };
        let epochs = Epochs {
            epochs: cfg.epochs_phase2,
            batch: cfg.batch_size,
            phase: 2,
            component: None,
            rng: stream_rng(cfg.seed, PHASE2_STREAM),
            history: &mut history,
        };
        fit_field(model, &trainable, &mut items, 1.0, cfg, epochs)?;
    }
    Ok(history)
}

/// One-step training of the direct map on frames `model.interval` apart,
/// for `epochs_phase1` epochs.
pub fn train_mlp(model: &mut MlpDynamicsModel, data: &TrajectoryDataset, cfg: &TrainConfig) -> Result<LossHistory> {
    model.validate()?;
    check_len("dataset dimension", model.dim(), data.dim())?;
    cfg.validate(cfg.intervals.len())?;
    cfg.expect_loss(1, LossKind::OneStep)?;
    if model.interval == 0 || model.interval > cfg.window {
        return Err(Error::InvalidParameter("model interval must lie within the training window".into()));
    }
    let window = training_window(data, cfg.window)?;
    let mut items = pairs(&subsample(&window, model.interval)?);
    let mut history = LossHistory::new();
    let mut opt = Optimizer::new(cfg.adam(), &[&model.params]);
    let epochs = Epochs {
        epochs: cfg.epochs_phase1,
        batch: cfg.batch_size,
        phase: 1,
        component: None,
        rng: stream_rng(cfg.seed, SHUFFLE_STREAM),
        history: &mut history,
    };
    epochs.run(&mut items, |batch| {
        let lg = mlp_onestep_loss(model, batch)?;
        if lg.loss.is_finite() {
            opt.apply(vec![&mut model.params], &lg.grads);
        }
        Ok(lg.loss)
    })?;
    Ok(history)
}
