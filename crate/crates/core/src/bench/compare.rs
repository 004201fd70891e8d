use serde::Serialize;

use super::{median, BenchSample};
use crate::catalog::MachineDescription;
use crate::model::EcmPrediction;

/// Rows whose ratio is further than this from 1 are flagged.
pub const FLAG_TOLERANCE: f64 = 0.2;

/// Working-set range in bytes whose samples represent one level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelWindow {
    pub lower: u64,
    /// `None` means unbounded.
    pub upper: Option<u64>,
}

impl LevelWindow {
    pub fn contains(&self, bytes: u64) -> bool {
        bytes >= self.lower && self.upper.map_or(true, |u| bytes <= u)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RowStatus {
    Ok,
    Flagged,
    Missing,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationRow {
    pub level: String,
    pub predicted_cycles: f64,
    pub measured_cycles: Option<f64>,
    /// measured / predicted
    pub ratio: Option<f64>,
    pub samples: usize,
    pub window: LevelWindow,
    pub status: RowStatus,
}

/// Windows `[2 x previous capacity, capacity / 2]` per level, L1 starting at
/// zero; a level without capacity is open-ended.
pub fn level_windows(machine: &MachineDescription, levels: usize) -> Vec<LevelWindow> {
    let caps = machine.capacities();
    (0..levels)
        .map(|i| {
            let lower = match i {
                0 => 0,
                _ => caps.get(i - 1).copied().flatten().map_or(0, |c| 2 * c),
            };
            let upper = caps.get(i).copied().flatten().map(|c| c / 2);
            LevelWindow { lower, upper }
        })
        .collect()
}

/// Working-set sizes that put samples into every window: two log-spaced
/// points inside each bounded window, one a quarter above the lower edge of
/// an open-ended one. Sizes are multiples of `granule`; empty windows get
/// none.
pub fn window_sizes(windows: &[LevelWindow], granule: u64) -> Vec<u64> {
    let round = |x: f64| ((x / granule as f64).round() as u64).max(1) * granule;
    let mut sizes: Vec<u64> = windows
        .iter()
        .flat_map(|w| match w.upper {
            Some(hi) => {
                let lo = if w.lower == 0 { hi / 8 } else { w.lower } as f64;
                let hi = hi as f64;
                [lo.powf(2.0 / 3.0) * hi.powf(1.0 / 3.0), lo.powf(1.0 / 3.0) * hi.powf(2.0 / 3.0)]
                    .into_iter()
                    .map(round)
                    .filter(|s| w.contains(*s))
                    .collect::<Vec<_>>()
            }
            None => vec![round(w.lower.max(granule) as f64 * 1.25)],
        })
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    sizes
}

/// One row per predicted level: median measured cycles/CL of the samples
/// inside the level's window against the prediction.
pub fn compare_to_model(
    samples: &[BenchSample],
    prediction: &EcmPrediction,
    machine: &MachineDescription,
) -> Vec<ValidationRow> {
    let windows = level_windows(machine, prediction.levels().len());
    prediction
        .levels()
        .iter()
        .zip(windows)
        .map(|((level, predicted), window)| {
            let mut inside: Vec<f64> = samples
                .iter()
                .filter(|s| window.contains(s.bytes))
                .map(|s| s.cycles_per_cl)
                .collect();
            let count = inside.len();
            let measured = (count > 0).then(|| median(&mut inside));
            let ratio = measured.map(|m| m / predicted);
            let status = match ratio {
                None => RowStatus::Missing,
                Some(r) if (r - 1.0).abs() > FLAG_TOLERANCE => RowStatus::Flagged,
                Some(_) => RowStatus::Ok,
            };
            ValidationRow {
                level: level.clone(),
                predicted_cycles: *predicted,
                measured_cycles: measured,
                ratio,
                samples: count,
                window,
                status,
            }
        })
        .collect()
}
