use std::collections::BTreeMap;

use super::{CellKey, TrialRecord};

/// Screening threshold in standard deviations.
pub const SCREEN_SD: f64 = 3.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Screening {
    pub kept: Vec<TrialRecord>,
    pub removed: Vec<TrialRecord>,
}

fn mean_sd(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let ss: f64 = values.map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per participant-and-condition 3SD rule on x, y and movement time.
///
/// Group statistics (mean, sample standard deviation) are computed once on
/// the unscreened group. An axis with zero spread removes nothing; groups of
/// a single trial are kept as-is. Output preserves input order.
pub fn screen_outliers(trials: &[TrialRecord]) -> Screening {
    let mut groups: BTreeMap<CellKey, Vec<usize>> = BTreeMap::new();
    for (i, t) in trials.iter().enumerate() {
        groups.entry(CellKey::of(t)).or_default().push(i);
    }

    let mut drop = vec![false; trials.len()];
    for idx in groups.values() {
        if idx.len() < 2 {
            continue;
        }
        let axes: [fn(&TrialRecord) -> f64; 3] = [|t| t.x, |t| t.y, |t| t.movement_time];
        for axis in axes {
            let (mean, sd) = mean_sd(idx.iter().map(|&i| axis(&trials[i])));
            if !(sd > 0.0) {
                continue;
            }
            for &i in idx {
                if (axis(&trials[i]) - mean).abs() > SCREEN_SD * sd {
                    drop[i] = true;
                }
            }
        }
    }

    let mut out = Screening::default();
    for (t, d) in trials.iter().zip(drop) {
        if d {
            out.removed.push(t.clone());
        } else {
            out.kept.push(t.clone());
        }
    }
    out
}
