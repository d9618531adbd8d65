use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustc_hash::FxHashMap;

use super::{
    all_identical, auto_fit_range, fit_loglog, DimensionEstimate, DimensionKind, FitRule, ScaleRow,
    ScaleSchedule,
};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};

/// Pairs drawn when a cloud is too large for exhaustive counting.
pub const DEFAULT_PAIR_BUDGET: u64 = 20_000_000;
/// Clouds up to this many points are counted exhaustively by default.
pub const EXACT_PAIR_LIMIT: usize = 5000;

const CHUNK_PAIRS: u64 = 1 << 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairBudget {
    /// Every unordered pair.
    All,
    /// This many uniformly drawn ordered pairs of distinct points.
    Sampled(u64),
}

impl PairBudget {
    /// Exhaustive for small clouds, sampled otherwise.
    pub fn default_for(points: usize) -> Self {
        if points <= EXACT_PAIR_LIMIT {
            PairBudget::All
        } else {
            PairBudget::Sampled(DEFAULT_PAIR_BUDGET)
        }
    }
}

/// Pair counts below each scale of a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    pub scales: Vec<f64>,
    /// Pairs at distance strictly below each scale.
    pub counts: Vec<u64>,
    /// Pairs examined (all unordered pairs, or the sample size).
    pub total: u64,
    pub sampled: bool,
}

impl PairCounts {
    pub fn rows(&self) -> Vec<ScaleRow> {
        self.scales
            .iter()
            .zip(&self.counts)
            .map(|(&scale, &count)| ScaleRow {
                scale,
                value: count as f64 / self.total as f64,
                count,
            })
            .collect()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Histogram slot: the number of scales strictly above `d`.
#[inline]
fn slot(scales: &[f64], d: f64) -> usize {
    scales.partition_point(|&s| s > d)
}

fn cumulate(hist: &[u64], n: usize) -> Vec<u64> {
    // a pair in slot K lies below scales 0..K
    let mut counts = vec![0u64; n];
    let mut acc = 0u64;
    for k in (0..n).rev() {
        acc += hist[k + 1];
        counts[k] = acc;
    }
    counts
}

fn add(mut a: Vec<u64>, b: Vec<u64>) -> Vec<u64> {
    for (x, y) in a.iter_mut().zip(b) {
        *x += y;
    }
    a
}

fn exact_histogram(cloud: &PointCloud, scales: &[f64]) -> Vec<u64> {
    match cloud.dim() {
        1 => exact_histogram_n::<1>(cloud, scales),
        2 => exact_histogram_n::<2>(cloud, scales),
        3 => exact_histogram_n::<3>(cloud, scales),
        _ => exact_histogram_n::<4>(cloud, scales),
    }
}

#[inline]
fn squared_distance<const D: usize>(a: &[f64; D], b: &[f64; D]) -> f64 {
    let mut acc = 0.0;
    for k in 0..D {
        acc += (a[k] - b[k]) * (a[k] - b[k]);
    }
    acc
}

/// Cell-list pair count with cells as wide as the largest scale.
fn exact_histogram_n<const D: usize>(cloud: &PointCloud, scales: &[f64]) -> Vec<u64> {
    let cell = scales[0];
    let (lo, _) = cloud.bounds().unwrap();
    let key_of = |p: &[f64]| {
        let mut key = [0i64; 4];
        for k in 0..D {
            key[k] = ((p[k] - lo[k]) / cell).floor() as i64;
        }
        key
    };
    let mut order: Vec<(usize, [i64; 4])> = cloud
        .points()
        .enumerate()
        .map(|(i, p)| (i, key_of(p)))
        .collect();
    order.sort_by(|a, b| a.1.cmp(&b.1).then(a.0.cmp(&b.0)));
    let sorted: Vec<[f64; D]> = order
        .iter()
        .map(|(i, _)| cloud.point(*i).try_into().unwrap())
        .collect();
    let mut cells: FxHashMap<[i64; 4], (usize, usize)> = FxHashMap::default();
    let mut keys = Vec::new();
    let mut start = 0;
    for idx in 1..=order.len() {
        if idx == order.len() || order[idx].1 != order[start].1 {
            cells.insert(order[start].1, (start, idx));
            keys.push(order[start].1);
            start = idx;
        }
    }
    // neighbour offsets strictly greater than zero in lexicographic order
    let mut offsets = Vec::new();
    for code in 0..3usize.pow(D as u32) {
        let mut off = [0i64; 4];
        let mut c = code;
        for k in (0..D).rev() {
            off[k] = (c % 3) as i64 - 1;
            c /= 3;
        }
        if off > [0; 4] {
            offsets.push(off);
        }
    }
    let n = scales.len();
    // pairs this far apart lie above every scale; the margin keeps the
    // shortcut from deciding any pair the exact comparison would not
    let far = cell * cell * (1.0 + 1e-9);
    let tally = |hist: &mut [u64], a: &[f64; D], b: &[f64; D]| {
        let d2 = squared_distance(a, b);
        if d2 > far {
            hist[0] += 1;
        } else {
            hist[slot(scales, d2.sqrt())] += 1;
        }
    };
    keys.par_iter()
        .map(|key| {
            let mut hist = vec![0u64; n + 1];
            let (a0, a1) = cells[key];
            for i in a0..a1 {
                for j in i + 1..a1 {
                    tally(&mut hist, &sorted[i], &sorted[j]);
                }
            }
            for off in &offsets {
                let mut nk = *key;
                for k in 0..D {
                    nk[k] += off[k];
                }
                if let Some(&(b0, b1)) = cells.get(&nk) {
                    for a in &sorted[a0..a1] {
                        for b in &sorted[b0..b1] {
                            tally(&mut hist, a, b);
                        }
                    }
                }
            }
            hist
        })
        .reduce(|| vec![0u64; n + 1], add)
}

fn sampled_histogram(cloud: &PointCloud, scales: &[f64], pairs: u64, seed: u64) -> Vec<u64> {
    let m = cloud.len();
    let n = scales.len();
    let chunks = pairs.div_ceil(CHUNK_PAIRS);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(c);
            let take = CHUNK_PAIRS.min(pairs - c * CHUNK_PAIRS);
            let mut hist = vec![0u64; n + 1];
            for _ in 0..take {
                let i = rng.gen_range(0..m);
                let mut j = rng.gen_range(0..m - 1);
                if j >= i {
                    j += 1;
                }
                hist[slot(scales, distance(cloud.point(i), cloud.point(j)))] += 1;
            }
            hist
        })
        .reduce(|| vec![0u64; n + 1], add)
}

/// Counts pairs closer than each scale, exhaustively or by seeded sampling.
/// Results are identical for a given seed regardless of thread count.
pub fn correlation_counts(
    cloud: &PointCloud,
    schedule: &ScaleSchedule,
    budget: PairBudget,
    seed: u64,
) -> Result<PairCounts> {
    let m = cloud.len();
    if m < 2 {
        return Err(Error::InvalidInput(format!(
            "correlation sums need at least 2 points, got {m}"
        )));
    }
    let scales = schedule.scales();
    let (hist, total, sampled) = match budget {
        PairBudget::All => {
            let total = m as u64 * (m as u64 - 1) / 2;
            (exact_histogram(cloud, scales), total, false)
        }
        PairBudget::Sampled(0) => {
            return Err(Error::InvalidParameter {
                name: "pairs",
                reason: "pair budget must be positive".into(),
            })
        }
        PairBudget::Sampled(p) => (sampled_histogram(cloud, scales, p, seed), p, true),
    };
    Ok(PairCounts {
        scales: scales.to_vec(),
        counts: cumulate(&hist, scales.len()),
        total,
        sampled,
    })
}

/// Grassberger-Procaccia correlation dimension with Euclidean distance.
pub fn correlation_dimension(
    cloud: &PointCloud,
    schedule: &ScaleSchedule,
    budget: PairBudget,
    seed: u64,
    range: Option<(usize, usize)>,
    rule: &FitRule,
) -> Result<DimensionEstimate> {
    let pc = correlation_counts(cloud, schedule, budget, seed)?;
    let table = pc.rows();
    let points = cloud.len();
    let sampled_pairs = pc.sampled.then_some(pc.total);
    if all_identical(cloud) {
        let mut est = DimensionEstimate::degenerate(DimensionKind::Correlation, table, points);
        est.sampled_pairs = sampled_pairs;
        return Ok(est);
    }
    if pc.counts.iter().all(|&c| c == 0) {
        return Err(Error::Fit(format!(
            "no pair closer than the largest scale {:e}; increase delta_max",
            schedule.max()
        )));
    }
    let rows = match range {
        Some(r) => r,
        None => auto_fit_range(&table, DimensionKind::Correlation, points, rule)?,
    };
    let fit = fit_loglog(&table, DimensionKind::Correlation, rows)?;
    Ok(DimensionEstimate {
        kind: DimensionKind::Correlation,
        value: fit.slope,
        stderr: fit.stderr,
        r2: fit.r2,
        fit_rows: rows,
        table,
        points,
        sampled_pairs,
        degenerate: false,
    })
}
