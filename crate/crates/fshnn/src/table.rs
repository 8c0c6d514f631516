//! Aggregates evaluation reports into a table shaped like the rollout-error
//! tables: one row per system and resolution, one column per model family.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Family;
use crate::experiment::Evaluation;
use crate::files::{read_json, RolloutInfo};
use crate::Failure;

/// What `eval` writes: the metrics plus where the prediction came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFile {
    pub rollout: Option<RolloutInfo>,
    pub evaluation: Evaluation,
}

const RES_ORDER: [&str; 4] = ["Low", "Med", "High", "Com."];
const FAMILIES: [(Family, &str); 3] = [(Family::Mlp, "mlp"), (Family::Hnn, "hnn"), (Family::FsHnn, "fs_hnn")];

fn res_rank(r: &str) -> usize {
    RES_ORDER.iter().position(|x| *x == r).unwrap_or(RES_ORDER.len())
}

/// Median of the scores; diverged runs count as infinite.
pub fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub const HEADER: [&str; 5] = ["system", "res", "mlp", "hnn", "fs_hnn"];

/// Table rows from report files. Reports without rollout provenance are
/// rejected since they cannot be placed.
pub fn build_table(paths: &[impl AsRef<Path>]) -> Result<Vec<Vec<String>>, Failure> {
    let mut cells: BTreeMap<(String, usize, String), BTreeMap<&str, Vec<f64>>> = BTreeMap::new();
    for p in paths {
        let p = p.as_ref();
        let rep: ReportFile = read_json(p)?;
        let info = rep.rollout.ok_or_else(|| Failure::format(p, "report has no rollout information"))?;
        let fam = FAMILIES.iter().find(|(f, _)| *f == info.family).map(|(_, n)| *n).unwrap_or("fs_hnn");
        let key = (info.system.clone(), res_rank(&info.resolution), info.resolution.clone());
        cells.entry(key).or_default().entry(fam).or_default().push(rep.evaluation.score());
    }
    Ok(cells
        .into_iter()
        .map(|((system, _, res), by_family)| {
            let mut row = vec![system, res];
            for (_, name) in FAMILIES {
                row.push(match by_family.get(name) {
                    None => String::new(),
                    Some(v) => {
                        let m = median(v.clone());
                        if m.is_finite() {
                            format!("{m:.3e}")
                        } else {
                            "diverged".into()
                        }
                    }
                });
            }
            row
        })
        .collect())
}
