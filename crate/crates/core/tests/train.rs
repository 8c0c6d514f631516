//! Training data, losses, the pipeline and metrics.

use fshnn_core::autodiff::{ParamLeaves, ParamVector, Tape, Var};
use fshnn_core::dataset::{StateLayout, Trajectory, TrajectoryDataset};
use fshnn_core::models::*;
use fshnn_core::nn::Activation;
use fshnn_core::systems::{generate_dataset, GenSettings, PendulumParams, System};
use fshnn_core::train::*;
use fshnn_core::{Error, Result};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn ds_from(frames: &[Vec<f64>], dt: f64) -> TrajectoryDataset {
    let dim = frames[0].len();
    let mut t = Trajectory::new(dim);
    for (k, f) in frames.iter().enumerate() {
        t.push(k as f64 * dt, f);
    }
    let n = frames.len();
    TrajectoryDataset::from_trajectories(StateLayout::Phase { dof: dim / 2 }, dt, &[t], vec![0.0; n]).unwrap()
}

fn pendulum_data(n_traj: usize, n_steps: usize, seed: u64) -> TrajectoryDataset {
    let settings = GenSettings { n_traj, n_steps, dt: Some(0.01), save_every: 1, seed };
    generate_dataset(&System::Pendulum(PendulumParams::default()), &settings).unwrap()
}

#[test]
fn subsample_examples() {
    let frames: Vec<Vec<f64>> = (0..10).map(|k| vec![k as f64, -(k as f64)]).collect();
    let ds = ds_from(&frames, 0.1);
    let s3 = subsample(&ds, 3).unwrap();
    assert_eq!(s3.n_frames, 4);
    assert_eq!(s3.states, vec![0.0, -0.0, 3.0, -3.0, 6.0, -6.0, 9.0, -9.0]);
    assert!((s3.frame_dt - 0.3).abs() < 1e-15);
    assert_eq!(subsample(&ds, 1).unwrap(), ds);
    assert_eq!(subsample(&subsample(&ds, 2).unwrap(), 2).unwrap().states, subsample(&ds, 4).unwrap().states);
    assert!(subsample(&ds, 0).is_err());
}

#[test]
fn derivative_is_exact_on_affine_and_constant_data() {
    let c = [0.5, -1.5];
    let frames: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64 * c[0], k as f64 * c[1]]).collect();
    let ds = ds_from(&frames, 0.25);
    for k in 0..6 {
        let d = derivative_estimate(&ds, 0, k).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-12 && (d[1] + 6.0).abs() < 1e-12, "{k}: {d:?}");
    }
    let flat = ds_from(&vec![vec![3.0, 4.0]; 5], 0.1);
    assert!((0..5).all(|k| derivative_estimate(&flat, 0, k).unwrap() == vec![0.0, 0.0]));
    assert!(derivative_estimate(&ds_from(&[vec![1.0, 1.0]], 0.1), 0, 0).is_err());
}

#[test]
fn subsampled_derivatives_track_the_analytic_field() {
    let p = PendulumParams::default();
    let ds = pendulum_data(20, 10, 1);
    let mut worst = [0.0f64; 3];
    for (slot, interval) in [1usize, 2, 3].into_iter().enumerate() {
        let sub = subsample(&ds, interval).unwrap();
        let h = sub.frame_dt;
        for tr in 0..sub.n_traj {
            for k in 0..sub.n_frames {
                let z = sub.frame(tr, k);
                let mut exact = [0.0; 2];
                p.rhs(z, &mut exact);
                let est = derivative_estimate(&sub, tr, k).unwrap();
                let err = (est[0] - exact[0]).abs().max((est[1] - exact[1]).abs());
                assert!(err < 2.0 * h * h, "interval {interval}: {err:e}");
                if interval == 1 {
                    assert!(err < 1e-3);
                }
                worst[slot] = worst[slot].max(err);
            }
        }
    }
    assert!(worst[0] < worst[2]);
}

struct ExactPendulum;

impl PhaseHamiltonian for ExactPendulum {
    fn dof(&self) -> usize {
        1
    }
    fn groups(&self) -> Vec<&ParamVector> {
        Vec::new()
    }
    fn groups_mut(&mut self) -> Vec<&mut ParamVector> {
        Vec::new()
    }
    fn record(&self, t: &mut Tape, _l: &[ParamLeaves], z: Var) -> Result<Var> {
        let q = t.slice(z, 0, 1);
        let p = t.slice(z, 1, 1);
        let k = t.square(p);
        let half = t.constant(&[0.5]);
        let k = t.scale(k, half);
        let c = t.cos(q);
        Ok(t.sub(k, c))
    }
    fn energy_and_grad(&self, z: &[f64]) -> Result<(f64, Vec<f64>)> {
        Ok((0.5 * z[1] * z[1] - z[0].cos(), vec![z[0].sin(), z[1]]))
    }
}

#[test]
fn gradient_loss_vanishes_for_exact_models() {
    let p = PendulumParams::default();
    let batch: Vec<Sample> = [[0.3, 0.1], [-1.2, 0.8], [2.0, -0.4]]
        .iter()
        .map(|z| {
            let mut zdot = vec![0.0; 2];
            p.rhs(z, &mut zdot);
            Sample { z: z.to_vec(), zdot }
        })
        .collect();
    let lg = hnn_grad_loss(&ExactPendulum, &[], &batch).unwrap();
    assert!(lg.loss < 1e-28, "{}", lg.loss);

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let m = HnnModel::new(2, &[12], Activation::Tanh, &mut rng).unwrap();
    let z = vec![0.4, -0.3, 1.1, 0.2];
    let zdot = hamiltonian_vector_field(&m, &z).unwrap();
    let lg = hnn_grad_loss(&m, &[true], &[Sample { z, zdot }]).unwrap();
    assert!(lg.loss < 1e-28);
    assert!(lg.grads[0].iter().all(|g| g.abs() < 1e-12));
    assert!(matches!(hnn_grad_loss(&m, &[true], &[]), Err(Error::EmptyBatch)));
}

fn random_batch(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Sample> {
    (0..n)
        .map(|_| Sample {
            z: (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect(),
            zdot: (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect(),
        })
        .collect()
}

fn check_fd(analytic: &[f64], mut f: impl FnMut(usize, f64) -> f64, indices: impl Iterator<Item = usize>, tol: f64) {
    let h = 1e-6;
    let scale = analytic.iter().fold(0.0f64, |a, b| a.max(b.abs()));
    for i in indices {
        let fd = (f(i, h) - f(i, -h)) / (2.0 * h);
        let err = (analytic[i] - fd).abs() / fd.abs().max(1e-3 * scale);
        assert!(err < tol, "param {i}: {} vs {fd} (rel {err:e})", analytic[i]);
    }
}

#[test]
fn gradient_loss_parameter_gradient_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut fs = FsHnnOdeModel::new(2, &[1, 2], &[8], &[5], Activation::Softplus, &mut rng).unwrap();
    for v in fs.combiner.params.values.iter_mut() {
        *v += rng.random_range(-0.4..0.4);
    }
    let batch = random_batch(&mut rng, 5, 4);
    let trainable = [true, false, true];
    let lg = hnn_grad_loss(&fs, &trainable, &batch).unwrap();
    assert!(lg.grads[1].is_empty());
    for g in [0usize, 2] {
        let n = fs.groups()[g].len();
        let base = fs.clone();
        check_fd(
            &lg.grads[g],
            |i, h| {
                let mut m = base.clone();
                m.groups_mut()[g].values[i] += h;
                hnn_grad_loss(&m, &trainable, &batch).unwrap().loss
            },
            0..n,
            1e-5,
        );
    }
}

fn small_pde(seed: u64) -> FsHnnPdeModel {
    let arch = PdeArch {
        stencil: 4,
        latent: 5,
        branch_hidden: vec![6],
        trunk_hidden: vec![5],
        operator_hidden: 3,
        operator_depth: 1,
        combiner_hidden: vec![3],
        activation: Activation::Softplus,
        ..Default::default()
    };
    FsHnnPdeModel::new(2, 8, 8, &[1, 2], &arch, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap()
}

fn random_pairs(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Pair> {
    (0..n)
        .map(|_| {
            let z: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let next = z.iter().map(|v| v + rng.random_range(-0.1..0.1)).collect();
            Pair { z, next }
        })
        .collect()
}

#[test]
fn one_step_loss_vanishes_for_a_still_field_and_zero_operator() {
    let mut m = small_pde(1);
    m.operator.values.fill(0.0);
    let z: Vec<f64> = (0..m.dim()).map(|i| (i as f64 * 0.37).sin()).collect();
    let all = PdeTrainable { h: vec![true; 3], operator: true };
    let lg = pde_onestep_loss(&m, &all, &[Pair { z: z.clone(), next: z }], 1.0).unwrap();
    assert_eq!(lg.loss, 0.0);
    assert!(pde_onestep_loss(&m, &all, &[], 1.0).is_err());
}

#[test]
fn one_step_loss_is_shift_invariant_for_equivariant_components() {
    let mut m = small_pde(2);
    // Branch input weights shared across cells within each channel, so every
    // component sees only channel totals and is shift invariant.
    let cells = 16;
    for c in &mut m.components {
        let w = c.params.slice_mut("branch.w0").unwrap();
        let cols = 2 * cells;
        for r in 0..w.len() / cols {
            for ch in 0..2 {
                let v = w[r * cols + ch * cells];
                for i in 0..cells {
                    w[r * cols + ch * cells + i] = v;
                }
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pairs = random_pairs(&mut rng, 2, m.dim());
    let shift = |d: &[f64], sy: isize, sx: isize| {
        fshnn_core::state::FieldState::from_data(2, 8, 8, 1.0, 1.0, d.to_vec()).unwrap().shifted(sy, sx).data
    };
    let flags = PdeTrainable { h: vec![true; 3], operator: true };
    let base = pde_onestep_loss(&m, &flags, &pairs, 1.0).unwrap().loss;
    for (sy, sx) in [(1, 0), (3, 5), (-2, 7)] {
        let moved: Vec<Pair> =
            pairs.iter().map(|p| Pair { z: shift(&p.z, sy, sx), next: shift(&p.next, sy, sx) }).collect();
        let l = pde_onestep_loss(&m, &flags, &moved, 1.0).unwrap().loss;
        assert!((l - base).abs() <= 1e-12 * base, "{l} vs {base}");
    }
}

#[test]
fn one_step_loss_gradient_matches_finite_difference() {
    let mut m = small_pde(3);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for v in m.combiner.params.values.iter_mut() {
        *v += rng.random_range(-0.3..0.3);
    }
    let pairs = random_pairs(&mut rng, 2, m.dim());
    let flags = PdeTrainable { h: vec![true, false, true], operator: true };
    let lg = pde_onestep_loss(&m, &flags, &pairs, 2.0).unwrap();
    assert!(lg.h_grads[1].is_empty());
    let pick = |n: usize, rng: &mut ChaCha8Rng| -> Vec<usize> { (0..25).map(|_| rng.random_range(0..n)).collect() };
    for g in [0usize, 2] {
        let n = m.h_groups()[g].len();
        let idx = pick(n, &mut rng);
        check_fd(
            &lg.h_grads[g],
            |i, h| {
                let mut mm = m.clone();
                mm.h_groups_mut()[g].values[i] += h;
                pde_onestep_loss(&mm, &flags, &pairs, 2.0).unwrap().loss
            },
            idx.into_iter(),
            1e-5,
        );
    }
    let idx = pick(m.operator.len(), &mut rng);
    check_fd(
        &lg.operator_grad,
        |i, h| {
            let mut mm = m.clone();
            mm.operator.values[i] += h;
            pde_onestep_loss(&mm, &flags, &pairs, 2.0).unwrap().loss
        },
        idx.into_iter(),
        1e-5,
    );
}

#[test]
fn mlp_loss_gradient_matches_finite_difference() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut m = MlpDynamicsModel::new(4, &[6], Activation::Tanh, 1, &mut rng).unwrap();
    for v in m.params.values.iter_mut() {
        *v += rng.random_range(-0.2..0.2);
    }
    let pairs = random_pairs(&mut rng, 3, 4);
    let lg = mlp_onestep_loss(&m, &pairs).unwrap();
    check_fd(
        &lg.grads[0],
        |i, h| {
            let mut mm = m.clone();
            mm.params.values[i] += h;
            mlp_onestep_loss(&mm, &pairs).unwrap().loss
        },
        0..m.params.len(),
        1e-5,
    );
}

#[test]
fn adam_runs_are_deterministic() {
    let run = || {
        let mut p = vec![0.5, -1.0, 2.0];
        let mut st = AdamState::new(3);
        let cfg = AdamConfig::default();
        for k in 0..50 {
            let g: Vec<f64> = p.iter().map(|v| 2.0 * v + (k as f64).sin()).collect();
            adam_step(&mut p, &g, &mut st, &cfg);
        }
        p
    };
    assert_eq!(run(), run());
}

fn quick_cfg(intervals: Vec<usize>) -> TrainConfig {
    TrainConfig { epochs_phase1: 4, epochs_phase2: 3, batch_size: 16, intervals, ..Default::default() }
}

#[test]
fn pipeline_is_deterministic_and_freezes_components() {
    let data = pendulum_data(8, 10, 2);
    let build = || FsHnnOdeModel::new(1, &[1, 2, 3], &[16], &[4], Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let cfg = quick_cfg(vec![1, 2, 3]);
    let mut a = build();
    let mut b = build();
    let ha = train_fs_hnn_ode(&mut a, &data, &cfg).unwrap();
    let hb = train_fs_hnn_ode(&mut b, &data, &cfg).unwrap();
    assert_eq!(ha, hb);
    assert_eq!(a, b);
    assert_eq!(ha.len(), 3 * 4 + 3);
    assert!(ha.iter().take(12).all(|r| r.phase == 1) && ha[12..].iter().all(|r| r.phase == 2));

    let after_phase1 = {
        let mut m = build();
        train_fs_hnn_ode(&mut m, &data, &TrainConfig { epochs_phase2: 0, ..cfg.clone() }).unwrap();
        m
    };
    assert_eq!(a.components, after_phase1.components);
    assert_ne!(a.combiner, after_phase1.combiner);

    let mut joint = build();
    train_fs_hnn_ode(&mut joint, &data, &TrainConfig { freeze_components: false, ..cfg }).unwrap();
    assert_ne!(joint.components, after_phase1.components);
}

#[test]
fn single_component_pipeline_is_plain_hnn_training() {
    let data = pendulum_data(6, 10, 3);
    let cfg = TrainConfig { epochs_phase2: 0, ..quick_cfg(vec![1]) };
    let mut fs = FsHnnOdeModel::new(1, &[1], &[12], &[4], Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let mut plain = fs.components[0].clone();
    train_fs_hnn_ode(&mut fs, &data, &cfg).unwrap();
    train_hnn(&mut plain, &data, &cfg).unwrap();
    assert_eq!(fs.components[0], plain);
    let z = [0.7, -0.2];
    assert_eq!(fs.energy(&z).unwrap(), plain.energy(&z).unwrap());
}

#[test]
fn non_finite_data_aborts_with_phase_and_epoch() {
    let mut data = pendulum_data(2, 10, 4);
    data.states[3] = f64::NAN;
    let mut m = FsHnnOdeModel::new(1, &[1], &[8], &[4], Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let err = train_fs_hnn_ode(&mut m, &data, &quick_cfg(vec![1])).unwrap_err();
    assert!(matches!(err, Error::NonFiniteLoss { phase: 1, epoch: 0 }), "{err:?}");
}

#[test]
fn config_is_checked_against_the_model() {
    let data = pendulum_data(2, 10, 4);
    let mut m = FsHnnOdeModel::new(1, &[1, 2], &[8], &[4], Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    assert!(train_fs_hnn_ode(&mut m, &data, &quick_cfg(vec![1, 2, 3])).is_err());
    assert!(train_fs_hnn_ode(&mut m, &data, &TrainConfig { lr: 0.0, ..quick_cfg(vec![1, 2]) }).is_err());
    let one_step = TrainConfig { loss_phase1: LossKind::OneStep, ..quick_cfg(vec![1, 2]) };
    assert!(train_fs_hnn_ode(&mut m, &data, &one_step).is_err());
}

fn smoothed_decreasing(losses: &[f64]) -> bool {
    let s: Vec<f64> = losses.windows(10).map(|w| w.iter().sum::<f64>() / 10.0).collect();
    s.windows(2).all(|w| w[1] < w[0])
}

#[test]
fn phase_one_loss_decreases_on_the_pendulum() {
    let data = pendulum_data(50, 10, 5);
    let passes = (0..3u64)
        .filter(|&seed| {
            let mut m =
                FsHnnOdeModel::new(1, &[1], &[32, 32], &[4], Activation::Tanh, &mut ChaCha8Rng::seed_from_u64(seed))
                    .unwrap();
            let cfg = TrainConfig { epochs_phase1: 50, epochs_phase2: 0, seed, intervals: vec![1], ..Default::default() };
            let h = train_fs_hnn_ode(&mut m, &data, &cfg).unwrap();
            let l: Vec<f64> = h.iter().map(|r| r.loss).collect();
            smoothed_decreasing(&l)
        })
        .count();
    assert!(passes >= 2);
}

#[test]
fn pde_pipeline_trains_and_keeps_per_scale_operators() {
    use fshnn_core::systems::{PulseParams, SweParams};
    let swe = SweParams { n: 8, ..Default::default() };
    let sys = System::SwePulse { swe, pulse: PulseParams { randomize_center: true, ..Default::default() } };
    let data = generate_dataset(&sys, &GenSettings { n_traj: 2, n_steps: 6, dt: None, save_every: 1, seed: 1 }).unwrap();
    let arch = PdeArch {
        stencil: 4,
        latent: 4,
        branch_hidden: vec![6],
        trunk_hidden: vec![4],
        operator_hidden: 3,
        operator_depth: 1,
        combiner_hidden: vec![3],
        ..Default::default()
    };
    let mut m = FsHnnPdeModel::new(3, 8, 8, &[1, 2], &arch, 1.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let cfg = TrainConfig {
        epochs_phase1: 2,
        epochs_phase2: 2,
        batch_size: 4,
        intervals: vec![1, 2],
        window: 5,
        loss_phase1: LossKind::OneStep,
        loss_phase2: LossKind::OneStep,
        ..Default::default()
    };
    let frozen = m.components.clone();
    let h = train_fs_hnn_pde(&mut m, &data, &cfg).unwrap();
    assert_eq!(h.len(), 6);
    assert!(h.iter().all(|r| r.loss.is_finite()));
    assert_eq!(m.component_operators.len(), 2);
    assert_ne!(m.components, frozen);
    assert!((m.dt_model - data.frame_dt).abs() < 1e-12);
    let single = m.single_component(1);
    assert_eq!(single.operator, m.component_operators[1]);
    let mut again = FsHnnPdeModel::new(3, 8, 8, &[1, 2], &arch, 1.0, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    assert_eq!(train_fs_hnn_pde(&mut again, &data, &cfg).unwrap(), h);
    assert_eq!(again, m);
}

fn traj(frames: &[Vec<f64>]) -> Trajectory {
    let mut t = Trajectory::new(frames[0].len());
    for (k, f) in frames.iter().enumerate() {
        t.push(k as f64, f);
    }
    t
}

#[test]
fn rollout_mse_examples() {
    let truth: Vec<Vec<f64>> = (0..11).map(|k| vec![k as f64, 0.5 * k as f64]).collect();
    let t = traj(&truth);
    assert_eq!(rollout_mse(&t, &t).unwrap(), 0.0);
    let shifted: Vec<Vec<f64>> = truth.iter().map(|f| f.iter().map(|v| v + 0.3).collect()).collect();
    assert!((rollout_mse(&traj(&shifted), &t).unwrap() - 0.09).abs() < 1e-15);
    let mut last = truth.clone();
    last[10][1] += 1.0;
    assert!((rollout_mse(&traj(&last), &t).unwrap() - 1.0 / 22.0).abs() < 1e-15);
    assert!(rollout_mse(&traj(&truth[..5]), &t).is_err());
}

proptest! {
    #[test]
    fn rollout_mse_is_symmetric_and_zero_only_when_equal(
        a in prop::collection::vec(-5.0f64..5.0, 12),
        b in prop::collection::vec(-5.0f64..5.0, 12),
    ) {
        let split = |v: &[f64]| traj(&v.chunks(3).map(|c| c.to_vec()).collect::<Vec<_>>());
        let (ta, tb) = (split(&a), split(&b));
        let ab = rollout_mse(&ta, &tb).unwrap();
        prop_assert_eq!(ab, rollout_mse(&tb, &ta).unwrap());
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab == 0.0, a == b);
        prop_assert_eq!(rollout_mse(&ta, &ta).unwrap(), 0.0);
    }
}

#[test]
fn energy_deviation_examples() {
    let d = energy_deviation(&[2.0, 2.0, 2.0]).unwrap();
    assert_eq!(d.curve, vec![0.0; 3]);
    assert!(!d.absolute);
    let d = energy_deviation(&[-1.5, -1.5, -3.0]).unwrap();
    assert_eq!(d.curve[2], -1.0);
    assert_eq!(energy_deviation(&[1.5, 3.0]).unwrap().curve[1], 1.0);
    let d = energy_deviation(&[0.0, 0.25]).unwrap();
    assert!(d.absolute);
    assert_eq!(d.curve, vec![0.0, 0.25]);
}

#[test]
fn pendulum_energy_deviation_is_small_and_trendless() {
    let ds = pendulum_data(1, 20_000, 6);
    let d = energy_deviation(&ds.energy).unwrap();
    assert!(d.curve.iter().all(|v| v.abs() < 1e-3));
    let n = d.curve.len() as f64;
    let mx = (n - 1.0) / 2.0;
    let my = d.curve.iter().sum::<f64>() / n;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, y) in d.curve.iter().enumerate() {
        num += (i as f64 - mx) * (y - my);
        den += (i as f64 - mx).powi(2);
    }
    assert!((num / den).abs() < 1e-9);
}

#[test]
fn evaluate_scores_the_finite_prefix_of_a_diverged_rollout() {
    let truth = traj(&(0..6).map(|k| vec![k as f64, 1.0]).collect::<Vec<_>>());
    let pred = traj(&(0..3).map(|k| vec![k as f64 + 1.0, 1.0]).collect::<Vec<_>>());
    let energy = |z: &[f64]| -> Result<f64> { Ok(z[0] + 1.0) };
    let r = evaluate(&pred, &truth, Some(&energy), Some(2)).unwrap();
    assert_eq!(r.mse_curve, vec![0.5; 3]);
    assert_eq!(r.rollout_mse, 0.5);
    assert_eq!(r.energy_deviation.unwrap(), vec![0.0, 0.5, 1.0]);
    assert_eq!(r.diverged_at, Some(2));
    assert!(evaluate(&pred, &truth, None, None).is_err());
}
