use rayon::prelude::*;
use rustc_hash::FxHashSet;

use super::{
    all_identical, auto_fit_range, fit_loglog, DimensionEstimate, DimensionKind, FitRule, ScaleRow,
    ScaleSchedule,
};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Number of occupied grid cells at each scale. The grid is anchored at the
/// cloud's lower bounding-box corner.
pub fn box_counts(cloud: &PointCloud, schedule: &ScaleSchedule) -> Result<Vec<ScaleRow>> {
    let (lo, _) = cloud
        .bounds()
        .ok_or_else(|| Error::InvalidInput("cannot box-count an empty cloud".into()))?;
    let dim = cloud.dim();
    Ok(schedule
        .scales()
        .par_iter()
        .map(|&delta| {
            let mut cells: FxHashSet<[i64; 4]> = FxHashSet::default();
            for p in cloud.points() {
                let mut key = [0i64; 4];
                for k in 0..dim {
                    key[k] = ((p[k] - lo[k]) / delta).floor() as i64;
                }
                cells.insert(key);
            }
            let n = cells.len() as u64;
            ScaleRow {
                scale: delta,
                value: n as f64,
                count: n,
            }
        })
        .collect())
}

/// Box-counting dimension. `range` overrides the automatic fit window.
pub fn box_counting(
    cloud: &PointCloud,
    schedule: &ScaleSchedule,
    range: Option<(usize, usize)>,
    rule: &FitRule,
) -> Result<DimensionEstimate> {
    let table = box_counts(cloud, schedule)?;
    let points = cloud.len();
    if all_identical(cloud) {
        return Ok(DimensionEstimate::degenerate(
            DimensionKind::Box,
            table,
            points,
        ));
    }
    let rows = match range {
        Some(r) => r,
        None => auto_fit_range(&table, DimensionKind::Box, points, rule)?,
    };
    let fit = fit_loglog(&table, DimensionKind::Box, rows)?;
    Ok(DimensionEstimate {
        kind: DimensionKind::Box,
        value: fit.slope,
        stderr: fit.stderr,
        r2: fit.r2,
        fit_rows: rows,
        table,
        points,
        sampled_pairs: None,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_square(n: usize) -> PointCloud {
        let mut s = 42u64;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let pts: Vec<[f64; 3]> = (0..n).map(|_| [next(), next(), 0.0]).collect();
        PointCloud::from_points(&["x", "y", "z"], &pts).unwrap()
    }

    #[test]
    fn counts_by_hand() {
        let c = PointCloud::from_points(
            &["x", "y", "z"],
            &[
                [0.0, 0.0, 0.0],
                [0.1, 0.1, 0.1],
                [0.9, 0.0, 0.0],
                [1.0, 1.0, 1.0],
            ],
        )
        .unwrap();
        let s = ScaleSchedule::from_scales(vec![2.0, 1.0, 0.5, 0.05]).unwrap();
        let rows = box_counts(&c, &s).unwrap();
        let counts: Vec<u64> = rows.iter().map(|r| r.count).collect();
        assert_eq!(counts, vec![1, 2, 3, 4]);
    }

    #[test]
    fn single_point_is_degenerate() {
        let c = PointCloud::from_points(&["x", "y", "z"], &[[1.0, 2.0, 3.0]; 5]).unwrap();
        let s = ScaleSchedule::from_scales(vec![1.0, 0.5, 0.25, 0.125]).unwrap();
        let est = box_counting(&c, &s, None, &FitRule::default()).unwrap();
        assert!(est.degenerate);
        assert_eq!(est.value, 0.0);
        assert!(est.table.iter().all(|r| r.count == 1));
    }

    #[test]
    fn uniform_square_is_two_dimensional() {
        let c = random_square(100_000);
        let s = ScaleSchedule::auto_tiling(&c, 8, 5).unwrap();
        let est = box_counting(&c, &s, None, &FitRule::default()).unwrap();
        assert!((est.value - 2.0).abs() < 0.05, "{}", est.value);
    }

    #[test]
    fn auto_tiling_keeps_endpoints() {
        let c = random_square(16);
        let e = c.max_extent();
        let s = ScaleSchedule::auto_tiling(&c, 8, 8).unwrap();
        assert_eq!(s.max(), e / 4.0);
        assert_eq!(s.min(), e / 1024.0);
        let g = ScaleSchedule::auto(&c, 8, 8).unwrap();
        assert_eq!(g.len(), 65);
        assert_eq!(g.max(), e / 4.0);
        assert!((g.min() - e / 1024.0).abs() < 1e-15);
    }
}
