use super::{DimensionKind, ScaleRow};
use crate::error::{Error, Result};

/// Result of an ordinary least-squares fit in log-log coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub stderr: f64,
    pub r2: f64,
    /// Rows actually used (positive values inside the range).
    pub used: usize,
    /// Rows inside the range dropped for a zero value.
    pub excluded_zero: usize,
}

fn abscissa(kind: DimensionKind, scale: f64) -> f64 {
    match kind {
        DimensionKind::Box => -scale.ln(),
        DimensionKind::Correlation => scale.ln(),
    }
}

/// OLS of `ln value` against `ln(1/scale)` (box) or `ln scale`
/// (correlation) over the inclusive row range.
pub fn fit_loglog(
    table: &[ScaleRow],
    kind: DimensionKind,
    range: (usize, usize),
) -> Result<LogLogFit> {
    let (lo, hi) = range;
    if lo > hi || hi >= table.len() {
        return Err(Error::Fit(format!(
            "fit range {lo}..={hi} outside table of {} rows",
            table.len()
        )));
    }
    let rows = &table[lo..=hi];
    let (xs, ys): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.value > 0.0)
        .map(|r| (abscissa(kind, r.scale), r.value.ln()))
        .unzip();
    let excluded_zero = rows.len() - xs.len();
    let n = xs.len();
    if n < 2 {
        return Err(Error::Fit(format!(
            "need at least 2 rows with positive values, got {n}"
        )));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("all scales in the fit range coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let e = y - (intercept + slope * x);
            e * e
        })
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    // exact two-point fits have no residual degrees of freedom
    let stderr = if n > 2 {
        (sse / (nf - 2.0) / sxx).sqrt()
    } else {
        0.0
    };
    Ok(LogLogFit {
        slope,
        intercept,
        stderr,
        r2,
        used: n,
        excluded_zero,
    })
}

/// Window selection rule for [`auto_fit_range`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitRule {
    pub min_window: usize,
    /// Windows whose R² is within this of the best count as tied.
    pub r2_tolerance: f64,
    /// Box rows with `N >= fraction * points` are saturated.
    pub saturation_fraction: f64,
    /// Correlation rows backed by fewer pairs are too noisy to fit.
    pub min_pairs: u64,
}

impl Default for FitRule {
    fn default() -> Self {
        FitRule {
            min_window: 4,
            r2_tolerance: 1e-3,
            saturation_fraction: 0.1,
            min_pairs: 1000,
        }
    }
}

impl FitRule {
    /// Exact R² maximisation, saturation only at the hard limits.
    pub fn strict() -> Self {
        FitRule {
            min_window: 4,
            r2_tolerance: 0.0,
            saturation_fraction: 1.0,
            min_pairs: 1,
        }
    }

    fn usable(&self, row: &ScaleRow, kind: DimensionKind, points: usize) -> bool {
        match kind {
            DimensionKind::Box => {
                row.count > 1
                    && (row.count as usize) < points
                    && (row.count as f64) < self.saturation_fraction * points as f64
            }
            DimensionKind::Correlation => {
                row.value > 0.0 && row.value < 1.0 && row.count >= self.min_pairs
            }
        }
    }
}

/// Picks the contiguous window of usable rows with the best R².
///
/// Rows at saturation (one box, every point in its own box, `C` at 0 or 1,
/// too few pairs) are never fitted. Among windows within `r2_tolerance` of
/// the best R², the longest wins, then the one at larger scales.
pub fn auto_fit_range(
    table: &[ScaleRow],
    kind: DimensionKind,
    points: usize,
    rule: &FitRule,
) -> Result<(usize, usize)> {
    let min_window = rule.min_window.max(2);
    if table.len() < min_window {
        return Err(Error::Fit(format!(
            "need at least {min_window} scales, got {}",
            table.len()
        )));
    }
    let usable: Vec<bool> = table.iter().map(|r| rule.usable(r, kind, points)).collect();
    let mut windows = Vec::new();
    for lo in 0..table.len() {
        for hi in lo + min_window - 1..table.len() {
            if !usable[lo..=hi].iter().all(|u| *u) {
                break;
            }
            if let Ok(fit) = fit_loglog(table, kind, (lo, hi)) {
                windows.push((lo, hi, fit.r2));
            }
        }
    }
    let best = windows
        .iter()
        .map(|w| w.2)
        .fold(f64::NEG_INFINITY, f64::max);
    windows
        .into_iter()
        .filter(|w| w.2 >= best - rule.r2_tolerance)
        .min_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)))
        .map(|(lo, hi, _)| (lo, hi))
        .ok_or_else(|| match kind {
            DimensionKind::Box => Error::Fit(format!(
                "no window of {min_window} unsaturated scales; adjust the scale range or add points"
            )),
            DimensionKind::Correlation => Error::Fit(format!(
                "no window of {min_window} scales with 0 < C(r) < 1; try a larger delta_max or more pairs"
            )),
        })
}
