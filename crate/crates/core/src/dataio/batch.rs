use serde::{Deserialize, Serialize};

use crate::overdose::{CoarseAgeBins, N_COARSE};

/// Deaths of one calendar year in the 22 coarse age bins. `None` marks a
/// suppressed or unreported count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationBatch {
    pub year: i32,
    pub deaths: Vec<Option<u64>>,
    /// Year total as printed in the source file, if it had one.
    pub reported_total: Option<u64>,
}

impl ObservationBatch {
    pub fn new(year: i32) -> Self {
        Self {
            year,
            deaths: vec![None; N_COARSE],
            reported_total: None,
        }
    }

    pub fn suppressed_mask(&self) -> Vec<bool> {
        self.deaths.iter().map(Option::is_none).collect()
    }

    pub fn available(&self) -> Vec<bool> {
        self.deaths.iter().map(Option::is_some).collect()
    }

    /// Sum over the bins that carry a count.
    pub fn known_total(&self) -> u64 {
        self.deaths.iter().flatten().sum()
    }
}

/// Coarse bin whose window is `[low, high)`.
pub fn bin_index(bins: &CoarseAgeBins, low: f64, high: f64) -> Option<usize> {
    bins.edges()
        .windows(2)
        .position(|w| (w[0] - low).abs() < 1e-9 && (w[1] - high).abs() < 1e-9)
}
