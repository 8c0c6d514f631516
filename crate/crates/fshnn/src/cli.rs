//! `fshnn gen | train | rollout | eval | table`.
//!
//! Exit codes: 0 on success, 1 on a usage error, 2 when a command fails.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use fshnn_core::systems::System;

use crate::config::ExperimentConfig;
use crate::experiment::{
    build_model, generate, model_intervals, resolution_label, rollout_model, score, train_model, Rollouts,
};
use crate::files::{
    load_checkpoint, load_dataset, save_checkpoint, save_dataset, write_curve_csv, write_json, write_loss_csv,
    write_rows_csv, DatasetMeta, RolloutInfo,
};
use crate::table::{build_table, ReportFile, HEADER};
use crate::Failure;

#[derive(Debug, Parser)]
#[command(name = "fshnn", about = "Generate data, train and evaluate (FS-)HNN models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a dataset; writes the container and a JSON sidecar holding
    /// the full configuration.
    Gen {
        config: PathBuf,
        #[arg(long, default_value = "dataset.fsh")]
        out: PathBuf,
    },
    /// Train the configured model; writes the checkpoint, its header and a
    /// loss CSV (`<out>.loss.csv`).
    Train {
        config: PathBuf,
        dataset: PathBuf,
        #[arg(long, default_value = "model.fsh")]
        out: PathBuf,
    },
    /// Roll out a checkpoint from the first frame of each trajectory.
    Rollout {
        checkpoint: PathBuf,
        dataset: PathBuf,
        #[arg(long)]
        steps: usize,
        /// Trajectories to roll out (default: the config's evaluation count).
        #[arg(long)]
        n_traj: Option<usize>,
        /// Roll out one single-scale component of an FS-HNN.
        #[arg(long)]
        component: Option<usize>,
        #[arg(long, default_value = "pred.fsh")]
        out: PathBuf,
    },
    /// Score a prediction against the truth; writes the report JSON and
    /// `<out>.mse.csv` (plus `<out>.energy.csv` with `--energy`).
    Eval {
        pred: PathBuf,
        truth: PathBuf,
        /// System whose energy is tracked along the prediction.
        #[arg(long)]
        energy: Option<String>,
        #[arg(long, default_value = "report.json")]
        out: PathBuf,
    },
    /// Aggregate reports into a CSV with rows Low/Med/High/Com. per system.
    Table {
        #[arg(required = true)]
        reports: Vec<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.with_extension("");
    let mut s = stem.into_os_string();
    s.push(suffix);
    PathBuf::from(s)
}

fn execute(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Gen { config, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let ds = generate(&cfg)?;
            let meta = DatasetMeta {
                layout: ds.layout,
                frame_dt: ds.frame_dt,
                n_traj: ds.n_traj,
                n_frames: ds.n_frames,
                config: Some(cfg),
                rollout: None,
            };
            save_dataset(&out, &ds, &meta)
        }
        Command::Train { config, dataset, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let (ds, _) = load_dataset(&dataset)?;
            let mut model = build_model(&cfg, &ds)?;
            let history = train_model(&cfg, &mut model, &ds)?;
            save_checkpoint(&out, &model, &cfg)?;
            write_loss_csv(&with_suffix(&out, ".loss.csv"), &history)
        }
        Command::Rollout { checkpoint, dataset, steps, n_traj, component, out } => {
            let (model, cfg) = load_checkpoint(&checkpoint)?;
            let (ds, _) = load_dataset(&dataset)?;
            let intervals = model_intervals(&model, &cfg.model.intervals);
            let (model, intervals) = match component {
                Some(k) => {
                    let i = *intervals.get(k).ok_or_else(|| Failure::Config(format!("no component {k}")))?;
                    (model.component(k)?, vec![i])
                }
                None => (model, intervals),
            };
            let n = n_traj.unwrap_or(cfg.evaluation.n_traj).min(ds.n_traj);
            let r = rollout_model(&model, &ds, steps, n)?;
            let pred = r.to_dataset()?;
            let info = RolloutInfo {
                system: cfg.system.name().to_string(),
                family: cfg.model.family,
                resolution: resolution_label(&intervals),
                intervals,
                component,
                seed: cfg.training.seed,
                steps,
                diverged_at: r.diverged_at.clone(),
            };
            let meta = DatasetMeta {
                layout: pred.layout,
                frame_dt: pred.frame_dt,
                n_traj: pred.n_traj,
                n_frames: pred.n_frames,
                config: None,
                rollout: Some(info),
            };
            save_dataset(&out, &pred, &meta)
        }
        Command::Eval { pred, truth, energy, out } => {
            let (p, pmeta) = load_dataset(&pred)?;
            let (t, tmeta) = load_dataset(&truth)?;
            let diverged = pmeta.rollout.as_ref().map(|r| r.diverged_at.clone()).unwrap_or_else(|| vec![None; p.n_traj]);
            let rollouts = Rollouts::from_dataset(&p, diverged)?;
            let system = match energy {
                None => None,
                Some(name) => Some(energy_system(&name, tmeta.config.as_ref())?),
            };
            let evaluation = score(&rollouts, &t, system.as_ref())?;
            write_curve_csv(&with_suffix(&out, ".mse.csv"), &evaluation.report.times, &evaluation.report.mse_curve)?;
            if let Some(e) = &evaluation.report.energy_deviation {
                write_curve_csv(&with_suffix(&out, ".energy.csv"), &evaluation.report.times, e)?;
            }
            write_json(&out, &ReportFile { rollout: pmeta.rollout, evaluation })
        }
        Command::Table { reports, out } => {
            let mut paths = Vec::new();
            for pat in &reports {
                let matches: Vec<PathBuf> = glob::glob(pat)
                    .map_err(|e| Failure::Config(format!("bad pattern {pat}: {e}")))?
                    .filter_map(Result::ok)
                    .collect();
                if matches.is_empty() {
                    paths.push(PathBuf::from(pat));
                } else {
                    paths.extend(matches);
                }
            }
            paths.sort();
            paths.dedup();
            let rows = build_table(&paths)?;
            match out {
                Some(o) => write_rows_csv(&o, &HEADER, rows),
                None => {
                    println!("{}", HEADER.join(","));
                    for r in rows {
                        println!("{}", r.join(","));
                    }
                    Ok(())
                }
            }
        }
    }
}

/// The named system, with the truth dataset's parameters when it was
/// generated from that system and defaults otherwise.
fn energy_system(name: &str, truth_cfg: Option<&ExperimentConfig>) -> Result<System, Failure> {
    if let Some(c) = truth_cfg {
        if c.system.name() == name {
            return Ok(c.system.clone());
        }
    }
    serde_json::from_value(serde_json::json!({ "name": name }))
        .map_err(|e| Failure::Config(format!("unknown system {name}: {e}")))
}
