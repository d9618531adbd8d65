//! Box-counting and correlation dimension estimates with log-log fit
//! diagnostics.

mod boxcount;
mod correlation;
mod fit;

use std::fmt;

pub use boxcount::{box_counting, box_counts};
pub use correlation::{
    correlation_counts, correlation_dimension, PairBudget, PairCounts, DEFAULT_PAIR_BUDGET,
    EXACT_PAIR_LIMIT,
};
pub use fit::{auto_fit_range, fit_loglog, FitRule, LogLogFit};

use crate::cloud::PointCloud;
use crate::error::{Error, Result};

pub const DEFAULT_SCALES_PER_OCTAVE: usize = 8;
pub const DEFAULT_OCTAVES: usize = 8;

/// Decreasing list of positive scales.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSchedule {
    scales: Vec<f64>,
}

impl ScaleSchedule {
    pub fn from_scales(scales: Vec<f64>) -> Result<Self> {
        if scales.len() < 4 {
            return Err(Error::InvalidInput(format!(
                "a scale schedule needs at least 4 scales, got {}",
                scales.len()
            )));
        }
        if scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidInput(
                "scales must be finite and positive".into(),
            ));
        }
        if scales.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::InvalidInput(
                "scales must be strictly decreasing".into(),
            ));
        }
        Ok(ScaleSchedule { scales })
    }

    /// `delta_max * ratio^k` for `k = 0..n`.
    pub fn geometric(delta_max: f64, ratio: f64, n: usize) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(Error::InvalidInput(format!(
                "scale ratio must be in (0, 1), got {ratio}"
            )));
        }
        ScaleSchedule::from_scales((0..n).map(|k| delta_max * ratio.powi(k as i32)).collect())
    }

    /// `per_octave` scales per halving, spanning `octaves` halvings down from
    /// `delta_max`.
    pub fn octaves(delta_max: f64, per_octave: usize, octaves: usize) -> Result<Self> {
        if per_octave == 0 || octaves == 0 {
            return Err(Error::InvalidInput(
                "scale schedule needs per_octave, octaves >= 1".into(),
            ));
        }
        let ratio = 0.5f64.powf(1.0 / per_octave as f64);
        let n = per_octave * octaves + 1;
        let mut s = ScaleSchedule::geometric(delta_max, ratio, n)?;
        // pin the last scale exactly to delta_max / 2^octaves
        *s.scales.last_mut().unwrap() = delta_max / 2f64.powi(octaves as i32);
        Ok(s)
    }

    /// Geometric schedule from a quarter of the longest bounding-box edge.
    pub fn auto(cloud: &PointCloud, per_octave: usize, octaves: usize) -> Result<Self> {
        let extent = positive_extent(cloud)?;
        ScaleSchedule::octaves(extent / 4.0, per_octave, octaves)
    }

    /// Like [`ScaleSchedule::auto`], but every scale is snapped to
    /// `extent / n` for an integer `n`, so the anchored counting grid tiles
    /// the bounding box exactly. Endpoints are unchanged.
    pub fn auto_tiling(cloud: &PointCloud, per_octave: usize, octaves: usize) -> Result<Self> {
        let extent = positive_extent(cloud)?;
        if per_octave == 0 || octaves == 0 {
            return Err(Error::InvalidInput(
                "scale schedule needs per_octave, octaves >= 1".into(),
            ));
        }
        let mut divisions: Vec<u64> = (0..=per_octave * octaves)
            .map(|k| (4.0 * 2f64.powf(k as f64 / per_octave as f64)).round() as u64)
            .collect();
        divisions.dedup();
        ScaleSchedule::from_scales(divisions.iter().map(|&n| extent / n as f64).collect())
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.scales[0]
    }

    pub fn min(&self) -> f64 {
        *self.scales.last().unwrap()
    }
}

fn positive_extent(cloud: &PointCloud) -> Result<f64> {
    let extent = cloud.max_extent();
    if extent > 0.0 {
        Ok(extent)
    } else {
        Err(Error::InvalidInput(
            "cannot derive scales from a cloud with zero extent".into(),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DimensionKind {
    Box,
    Correlation,
}

impl fmt::Display for DimensionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DimensionKind::Box => "box",
            DimensionKind::Correlation => "correlation",
        })
    }
}

/// One row of the raw scaling table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleRow {
    pub scale: f64,
    /// `N(delta)` for box counts, `C(r)` for correlation sums.
    pub value: f64,
    /// Occupied cells, or pairs closer than the scale.
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionEstimate {
    pub kind: DimensionKind,
    pub value: f64,
    pub stderr: f64,
    pub r2: f64,
    /// Inclusive row indices `(first, last)` of the fitted window.
    pub fit_rows: (usize, usize),
    pub table: Vec<ScaleRow>,
    pub points: usize,
    /// Number of sampled pairs when the correlation sum was not exhaustive.
    pub sampled_pairs: Option<u64>,
    /// All points coincide; `value` is 0 and no fit was made.
    pub degenerate: bool,
}

impl DimensionEstimate {
    /// `(largest, smallest)` scale of the fitted window.
    pub fn fit_range(&self) -> (f64, f64) {
        (
            self.table[self.fit_rows.0].scale,
            self.table[self.fit_rows.1].scale,
        )
    }

    fn degenerate(kind: DimensionKind, table: Vec<ScaleRow>, points: usize) -> Self {
        let last = table.len().saturating_sub(1);
        DimensionEstimate {
            kind,
            value: 0.0,
            stderr: 0.0,
            r2: 1.0,
            fit_rows: (0, last),
            table,
            points,
            sampled_pairs: None,
            degenerate: true,
        }
    }
}

fn all_identical(cloud: &PointCloud) -> bool {
    let first = cloud.point(0);
    cloud.points().all(|p| p == first)
}
