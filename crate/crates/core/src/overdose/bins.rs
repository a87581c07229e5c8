use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::agestruct::AgeGrid;
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const N_COARSE: usize = 22;

/// Reporting age groups: `[0,1), [1,5), [5,10), ..., [95,100), [100,120)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoarseAgeBins {
    edges: Vec<f64>,
}

impl Default for CoarseAgeBins {
    fn default() -> Self {
        let mut edges = vec![0.0, 1.0];
        edges.extend((1..=20).map(|k| 5.0 * k as f64));
        edges.push(120.0);
        Self { edges }
    }
}

impl CoarseAgeBins {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.len() != N_COARSE + 1 {
            return Err(Error::config(format!("expected {} bin edges, got {}", N_COARSE + 1, edges.len())));
        }
        if edges.windows(2).any(|w| !(w[1] > w[0])) || edges[0] != 0.0 {
            return Err(Error::config("bin edges must start at 0 and increase strictly"));
        }
        Ok(Self { edges })
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn len(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn midpoints(&self) -> Vec<f64> {
        self.edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Maps every coarse edge onto a boundary of the fine `grid`.
    pub fn align<T: Real>(&self, grid: &AgeGrid<T>, policy: EdgePolicy) -> Result<AlignedBins> {
        if grid.a0() != T::zero() {
            return Err(Error::config("coarse-graining needs a fine grid starting at age 0"));
        }
        let da = grid.delta_a().to_f64_lossy();
        let mut boundaries = Vec::with_capacity(self.edges.len());
        for &edge in &self.edges {
            let k = (edge / da).round();
            let exact = (k * da - edge).abs() <= 1e-9 * edge.max(1.0);
            if !exact && policy == EdgePolicy::Strict {
                return Err(Error::config(format!(
                    "coarse edge {edge} is not a boundary of the fine grid with delta_a = {da}"
                )));
            }
            boundaries.push((k.max(0.0) as usize).min(grid.len()));
        }
        if boundaries.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("fine grid too coarse: two coarse edges snap to the same boundary"));
        }
        if *boundaries.last().expect("edges are nonempty") != grid.len() {
            return Err(Error::config(format!(
                "fine grid ends at {} but the last coarse edge is {}",
                grid.upper(),
                self.edges[self.edges.len() - 1]
            )));
        }
        let snapped: Vec<f64> = boundaries.iter().map(|&k| k as f64 * da).collect();
        Ok(AlignedBins {
            bins: self.clone(),
            ranges: boundaries.windows(2).map(|w| w[0]..w[1]).collect(),
            snapped_edges: snapped,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum EdgePolicy {
    /// Every coarse edge must coincide with a fine boundary.
    Strict,
    /// Move each coarse edge to the nearest fine boundary.
    #[default]
    Snap,
}

/// Coarse bins resolved to index ranges of a fine grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignedBins {
    bins: CoarseAgeBins,
    ranges: Vec<Range<usize>>,
    snapped_edges: Vec<f64>,
}

impl AlignedBins {
    pub fn bins(&self) -> &CoarseAgeBins {
        &self.bins
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    /// Edge ages actually used, after snapping.
    pub fn snapped_edges(&self) -> &[f64] {
        &self.snapped_edges
    }

    /// `(requested, used)` for every edge that moved.
    pub fn moved_edges(&self) -> Vec<(f64, f64)> {
        self.bins
            .edges()
            .iter()
            .zip(&self.snapped_edges)
            .filter(|(a, b)| (*a - *b).abs() > 1e-9)
            .map(|(a, b)| (*a, *b))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn fine_len(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }
}

/// Sums fine-bin counts over every coarse age window.
pub fn coarse_grain<T: Real>(d_tilde: &[T], bins: &AlignedBins) -> Result<Vec<T>> {
    if d_tilde.len() != bins.fine_len() {
        return Err(Error::config(format!(
            "fine vector has {} entries, bins expect {}",
            d_tilde.len(),
            bins.fine_len()
        )));
    }
    Ok(coarse_grain_unchecked(d_tilde, bins))
}

pub(crate) fn coarse_grain_into<T: Real>(d_tilde: &[T], bins: &AlignedBins, out: &mut [T]) {
    for (o, r) in out.iter_mut().zip(bins.ranges()) {
        *o = d_tilde[r.clone()].iter().copied().sum();
    }
}

fn coarse_grain_unchecked<T: Real>(d_tilde: &[T], bins: &AlignedBins) -> Vec<T> {
    let mut out = vec![T::zero(); bins.len()];
    coarse_grain_into(d_tilde, bins, &mut out);
    out
}

/// Annual deaths in thousands: `(coarse_grain(d_tilde) - baseline) / scale`.
pub fn measure<T: Real>(d_tilde: &[T], bins: &AlignedBins, baseline: &[T], scale: T) -> Result<Vec<T>> {
    if baseline.len() != bins.len() {
        return Err(Error::config(format!("baseline has {} entries, expected {}", baseline.len(), bins.len())));
    }
    let mut coarse = coarse_grain(d_tilde, bins)?;
    for (c, b) in coarse.iter_mut().zip(baseline) {
        *c = (*c - *b) / scale;
    }
    Ok(coarse)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn default_grid() -> AgeGrid<f64> {
        AgeGrid::new(0.0, 0.12, 1000).unwrap()
    }

    #[test]
    fn default_edges_and_widths() {
        let b = CoarseAgeBins::default();
        assert_eq!(b.len(), 22);
        let widths: Vec<f64> = b.edges().windows(2).map(|w| w[1] - w[0]).collect();
        assert_eq!(widths[0], 1.0);
        assert_eq!(widths[1], 4.0);
        assert!(widths[2..21].iter().all(|w| *w == 5.0));
        assert_eq!(widths[21], 20.0);
    }

    #[test]
    fn strict_policy_rejects_default_grid_and_snap_reports() {
        let b = CoarseAgeBins::default();
        assert!(matches!(b.align(&default_grid(), EdgePolicy::Strict), Err(Error::Config(_))));
        let aligned = b.align(&default_grid(), EdgePolicy::Snap).unwrap();
        let moved = aligned.moved_edges();
        assert!((moved[0].1 - 0.96).abs() < 1e-12);
        assert!(moved.iter().all(|(want, got)| (want - got).abs() <= 0.06 + 1e-12));
        let exact = AgeGrid::new(0.0, 0.25, 480).unwrap();
        assert!(b.align(&exact, EdgePolicy::Strict).unwrap().moved_edges().is_empty());
    }

    #[test]
    fn containment() {
        let aligned = CoarseAgeBins::default().align(&default_grid(), EdgePolicy::Snap).unwrap();
        let mut d = vec![0.0; 1000];
        d[20] = 7.0; // [2.40, 2.52)
        let c = coarse_grain(&d, &aligned).unwrap();
        assert_eq!(c[1], 7.0);
        assert_eq!(c.iter().sum::<f64>(), 7.0);
    }

    #[test]
    fn uniform_counts_scale_with_width() {
        let grid = AgeGrid::new(0.0, 0.25, 480).unwrap();
        let aligned = CoarseAgeBins::default().align(&grid, EdgePolicy::Strict).unwrap();
        let c = coarse_grain(&vec![3.0; 480], &aligned).unwrap();
        for (v, w) in c.iter().zip(CoarseAgeBins::default().edges().windows(2)) {
            assert_eq!(*v, 3.0 * (w[1] - w[0]) / 0.25);
        }
    }

    #[test]
    fn measure_scaling_and_baseline() {
        let aligned = CoarseAgeBins::default().align(&default_grid(), EdgePolicy::Snap).unwrap();
        let mut d = vec![0.0; 1000];
        d[500] = 32_000.0;
        let zero = vec![0.0; 22];
        let m = measure(&d, &aligned, &zero, 1e3).unwrap();
        let slot = aligned.ranges().iter().position(|r| r.contains(&500)).unwrap();
        assert_eq!(m[slot], 32.0);
        let base = coarse_grain(&d, &aligned).unwrap();
        assert!(measure(&d, &aligned, &base, 1e3).unwrap().iter().all(|v| *v == 0.0));
        let b: Vec<f64> = (0..22).map(|i| i as f64 * 10.0).collect();
        let shifted = measure(&d, &aligned, &b, 1e3).unwrap();
        for ((s, m0), bi) in shifted.iter().zip(&m).zip(&b) {
            assert!((s - (m0 - bi / 1e3)).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn integer_counts_are_conserved(counts in proptest::collection::vec(0u32..100_000, 1000)) {
            let aligned = CoarseAgeBins::default().align(&default_grid(), EdgePolicy::Snap).unwrap();
            let d: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
            let total: f64 = d.iter().sum();
            prop_assert_eq!(coarse_grain(&d, &aligned).unwrap().iter().sum::<f64>(), total);
        }
    }
}
