use alloc::vec;
use alloc::vec::Vec;

use super::data::{Pair, Sample};
use crate::autodiff::{ParamLeaves, Tape, Var};
use crate::error::{check_len, Error, Result};
use crate::models::{record_projection, FsHnnPdeModel, MlpDynamicsModel, PhaseHamiltonian};

/// Loss value with one gradient per parameter group; frozen groups get an
/// empty vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LossGrad {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
}

/// Gradient-matching loss
///
/// `L = mean_n ‖∂H/∂p − q̇‖² + ‖∂H/∂q + ṗ‖²`
///
/// and its parameter gradient. All samples share one tape whose output is
/// `Σ_n H(z_n)`; a reverse sweep gives every `∇H(z_n)`, and one
/// forward-over-reverse sweep seeded with `∂L/∂(∇H(z_n))` on each input
/// gives the parameter gradient.
pub fn hnn_grad_loss<H: PhaseHamiltonian + ?Sized>(model: &H, trainable: &[bool], batch: &[Sample]) -> Result<LossGrad> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let d = model.dof();
    let mut tape = Tape::new();
    let leaves = model.record_groups(&mut tape, trainable);
    let mut zs = Vec::with_capacity(batch.len());
    let mut hs = Vec::with_capacity(batch.len());
    for s in batch {
        check_len("sample state", 2 * d, s.z.len())?;
        check_len("sample derivative", 2 * d, s.zdot.len())?;
        let z = tape.input(&s.z);
        hs.push(model.record(&mut tape, &leaves, z)?);
        zs.push(z);
    }
    let all = tape.concat(&hs);
    let total = tape.sum(all);
    tape.set_output(total);
    let adj = tape.adjoints()?;
    let scale = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut dirs: Vec<Vec<f64>> = Vec::with_capacity(batch.len());
    for (s, &z) in batch.iter().zip(&zs) {
        let g = adj.of(z);
        let mut dir = vec![0.0; 2 * d];
        for i in 0..d {
            let rq = g[d + i] - s.zdot[i];
            let rp = g[i] + s.zdot[d + i];
            loss += scale * (rq * rq + rp * rp);
            dir[i] = 2.0 * scale * rp;
            dir[d + i] = 2.0 * scale * rq;
        }
        dirs.push(dir);
    }
    let seeds: Vec<(Var, &[f64])> = zs.iter().copied().zip(dirs.iter().map(|v| v.as_slice())).collect();
    let dual = tape.directional(&seeds)?;
    let grads = gather_trainable(&leaves, trainable, |l| dual.tangent.gather(&l.vars));
    Ok(LossGrad { loss, grads })
}

fn gather_trainable(leaves: &[ParamLeaves], trainable: &[bool], f: impl Fn(&ParamLeaves) -> Vec<f64>) -> Vec<Vec<f64>> {
    leaves
        .iter()
        .enumerate()
        .map(|(i, l)| if trainable.get(i).copied().unwrap_or(false) { f(l) } else { Vec::new() })
        .collect()
}

/// Which parts of a field model receive gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeTrainable {
    /// One flag per Hamiltonian group (components, then combiner).
    pub h: Vec<bool>,
    pub operator: bool,
}

/// Gradients of [`pde_onestep_loss`]: Hamiltonian groups, then operator.
#[derive(Debug, Clone, PartialEq)]
pub struct PdeLossGrad {
    pub loss: f64,
    pub h_grads: Vec<Vec<f64>>,
    pub operator_grad: Vec<f64>,
}

/// One-step loss `mean ‖z_t + s·Δz(z_t) − z_{t+1}‖²` over grid and batch,
/// on normalised states. Gradients flow through the projection.
///
/// Each sample uses two tapes: one for `H`, giving `g = ∇H(z_t)`, and one for
/// the operator and projection with `g` as an input. The second tape yields
/// `∂L/∂g`, which seeds a forward-over-reverse sweep of the first.
pub fn pde_onestep_loss(
    model: &FsHnnPdeModel,
    trainable: &PdeTrainable,
    batch: &[Pair],
    step_scale: f64,
) -> Result<PdeLossGrad> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = model.dim();
    let groups = model.h_groups();
    check_len("Hamiltonian trainable flags", groups.len(), trainable.h.len())?;
    let norm = 1.0 / (batch.len() * dim) as f64;
    let mut loss = 0.0;
    let mut h_grads: Vec<Vec<f64>> =
        groups.iter().zip(&trainable.h).map(|(g, &t)| if t { vec![0.0; g.len()] } else { Vec::new() }).collect();
    let mut operator_grad = if trainable.operator { vec![0.0; model.operator.len()] } else { Vec::new() };
    for pair in batch {
        check_len("pair state", dim, pair.z.len())?;
        check_len("pair target", dim, pair.next.len())?;
        let mut ta = Tape::new();
        let h_leaves: Vec<ParamLeaves> = groups
            .iter()
            .zip(&trainable.h)
            .map(|(g, &t)| if t { g.record(&mut ta) } else { g.record_const(&mut ta) })
            .collect();
        let z = ta.input(&pair.z);
        let h = model.record_h(&mut ta, &h_leaves, z)?;
        ta.set_output(h);
        let grad = ta.adjoints()?.of(z).to_vec();

        let mut tb = Tape::new();
        let op_leaves = if trainable.operator { model.operator.record(&mut tb) } else { model.operator.record_const(&mut tb) };
        let g = tb.input(&grad);
        let raw = model.operator_spec.record(&mut tb, &op_leaves.vars, g, model.ny, model.nx);
        let delta = record_projection(&mut tb, g, raw, model.xi);
        let s = tb.constant(&[step_scale]);
        let step = tb.scale(delta, s);
        let z_b = tb.constant(&pair.z);
        let pred = tb.add(z_b, step);
        let target = tb.constant(&pair.next);
        let err = tb.sub(pred, target);
        let sq = tb.square(err);
        let total = tb.sum(sq);
        tb.set_output(total);
        loss += norm * tb.scalar(total);
        let adj = tb.adjoints()?;
        if trainable.operator {
            for (o, v) in operator_grad.iter_mut().zip(op_leaves.gather(&adj)) {
                *o += norm * v;
            }
        }
        if trainable.h.iter().any(|&t| t) {
            let dl_dg: Vec<f64> = adj.of(g).iter().map(|v| norm * v).collect();
            let dual = ta.directional(&[(z, &dl_dg)])?;
            for ((acc, l), &t) in h_grads.iter_mut().zip(&h_leaves).zip(&trainable.h) {
                if t {
                    for (o, v) in acc.iter_mut().zip(l.gather(&dual.tangent)) {
                        *o += v;
                    }
                }
            }
        }
    }
    Ok(PdeLossGrad { loss, h_grads, operator_grad })
}

/// One-step MSE of the direct map, `mean ‖z + net(z) − z'‖²`.
pub fn mlp_onestep_loss(model: &MlpDynamicsModel, batch: &[Pair]) -> Result<LossGrad> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let dim = model.dim();
    let mut tape = Tape::new();
    let leaves = model.params.record(&mut tape);
    let mut terms = Vec::with_capacity(batch.len());
    for p in batch {
        let z = tape.input(&p.z);
        let d = model.spec.record(&mut tape, &leaves.vars, z);
        let pred = tape.add(z, d);
        let t = tape.constant(&p.next);
        let e = tape.sub(pred, t);
        let sq = tape.square(e);
        terms.push(tape.sum(sq));
    }
    let all = tape.concat(&terms);
    let total = tape.sum(all);
    let scale = tape.constant(&[1.0 / (batch.len() * dim) as f64]);
    let out = tape.scale(total, scale);
    tape.set_output(out);
    let grad = leaves.gather(&tape.adjoints()?);
    Ok(LossGrad { loss: tape.scalar(out), grads: vec![grad] })
}
