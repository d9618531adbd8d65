//! Regime classification, Lyapunov spectra, x_in sweeps and hysteresis
//! scans.

use std::fmt;

use rayon::prelude::*;

use crate::dynamics::{
    checked_step, to_array, IterateOptions, LevelSystem, Model, Orbit, DEFAULT_DIVERGENCE_BOUND,
    DEFAULT_TRANSIENT,
};
use crate::error::{Error, Result};

pub const DEFAULT_KEEP: usize = 100_000;
pub const DEFAULT_MAX_PERIOD: usize = 4096;
pub const DEFAULT_PERIOD_TOL: f64 = 1e-8;
pub const DEFAULT_CHAOS_THRESHOLD: f64 = 1e-3;
pub const DEFAULT_SWEEP_SAMPLES: usize = 256;
pub const DEFAULT_HYSTERESIS_THRESHOLD: f64 = 1e-2;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovSpectrum {
    /// Per-iteration natural-log rates, largest first.
    pub exponents: Vec<f64>,
    pub iterations: usize,
    pub reortho_every: usize,
}

impl LyapunovSpectrum {
    pub fn largest(&self) -> f64 {
        self.exponents[0]
    }

    pub fn sum(&self) -> f64 {
        self.exponents.iter().sum()
    }
}

/// Modified Gram-Schmidt on the columns of `q`, in place. Returns the
/// diagonal of the triangular factor.
fn reorthonormalize<const N: usize>(q: &mut [[f64; N]; N]) -> [f64; N] {
    let mut diag = [0.0; N];
    for j in 0..N {
        for i in 0..j {
            let dot: f64 = q.iter().map(|row| row[i] * row[j]).sum();
            for row in q.iter_mut() {
                row[j] -= dot * row[i];
            }
        }
        let norm = q.iter().map(|row| row[j] * row[j]).sum::<f64>().sqrt();
        diag[j] = norm;
        if norm > 0.0 {
            for row in q.iter_mut() {
                row[j] /= norm;
            }
        }
    }
    diag
}

fn mat_mul<const N: usize>(a: &[[f64; N]; N], b: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut c = [[0.0; N]; N];
    for i in 0..N {
        for k in 0..N {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..N {
                    c[i][j] += aik * b[k][j];
                }
            }
        }
    }
    c
}

/// Tangent-space Lyapunov spectrum after discarding `n_transient` steps.
pub fn lyapunov_spectrum<const N: usize, S: LevelSystem<N>>(
    sys: &S,
    s0: [f64; N],
    n_transient: usize,
    n_iter: usize,
    reortho_every: usize,
) -> Result<LyapunovSpectrum> {
    if n_iter == 0 {
        return Err(Error::InvalidInput("n_iter must be at least 1".into()));
    }
    if reortho_every == 0 {
        return Err(Error::InvalidParameter {
            name: "reortho_every",
            reason: "must be at least 1".into(),
        });
    }
    let mut s = s0;
    for n in 0..n_transient {
        s = checked_step(sys, &s, n as u64 + 1)?;
    }
    let mut q = [[0.0; N]; N];
    for (i, row) in q.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    let mut sums = [0.0; N];
    for n in 0..n_iter {
        let j = sys.jacobian(&s);
        q = mat_mul(&j, &q);
        s = checked_step(sys, &s, (n_transient + n) as u64 + 1)?;
        if (n + 1) % reortho_every == 0 || n + 1 == n_iter {
            let diag = reorthonormalize(&mut q);
            for (acc, d) in sums.iter_mut().zip(diag) {
                *acc += d.ln();
            }
        }
    }
    let mut exponents: Vec<f64> = sums.iter().map(|v| v / n_iter as f64).collect();
    exponents.sort_by(|a, b| b.total_cmp(a));
    Ok(LyapunovSpectrum {
        exponents,
        iterations: n_iter,
        reortho_every,
    })
}

impl Model {
    pub fn lyapunov_spectrum(
        &self,
        s0: &[f64],
        n_transient: usize,
        n_iter: usize,
        reortho_every: usize,
    ) -> Result<LyapunovSpectrum> {
        self.step(s0)?;
        match self {
            Model::Three(p) => {
                lyapunov_spectrum(p, to_array(s0), n_transient, n_iter, reortho_every)
            }
            Model::Four(p) => {
                lyapunov_spectrum(p, to_array(s0), n_transient, n_iter, reortho_every)
            }
        }
    }
}

/// Smallest `p <= max_period` with `|s[i+p] - s[i]| <= tol * (1 + |s[i]|)`
/// componentwise for every retained `i`. `max_period` is clamped to half the
/// orbit length.
pub fn detect_period(orbit: &Orbit, tol: f64, max_period: usize) -> Option<usize> {
    detect_period_flat(orbit.as_flat(), orbit.dim(), tol, max_period)
}

pub(crate) fn detect_period_flat(
    data: &[f64],
    dim: usize,
    tol: f64,
    max_period: usize,
) -> Option<usize> {
    let len = data.len() / dim;
    let max_p = max_period.min(len / 2);
    (1..=max_p).find(|&p| {
        let shift = p * dim;
        data[..data.len() - shift]
            .iter()
            .zip(&data[shift..])
            .all(|(a, b)| (b - a).abs() <= tol * (1.0 + a.abs()))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Regime {
    FixedPoint,
    Periodic(usize),
    Quasiperiodic,
    Chaotic,
    Divergent,
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Regime::FixedPoint => f.write_str("fixed_point"),
            Regime::Periodic(p) => write!(f, "periodic({p})"),
            Regime::Quasiperiodic => f.write_str("quasiperiodic"),
            Regime::Chaotic => f.write_str("chaotic"),
            Regime::Divergent => f.write_str("divergent"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evidence {
    /// `None` when the orbit escaped before the exponent could be measured.
    pub largest_exponent: Option<f64>,
    pub period: Option<usize>,
    pub bounded: bool,
    /// Iteration index of the escape, counted from the initial state.
    pub divergence_step: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegimeLabel {
    pub regime: Regime,
    pub evidence: Evidence,
}

impl fmt::Display for RegimeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.regime)?;
        if let Some(l) = self.evidence.largest_exponent {
            write!(f, " lambda_max={l:.6e}")?;
        }
        if let Some(step) = self.evidence.divergence_step {
            write!(f, " escaped_at={step}")?;
        }
        Ok(())
    }
}

/// Iteration budget and decision thresholds for [`classify`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifyOptions {
    pub n_transient: usize,
    pub n_keep: usize,
    pub max_period: usize,
    pub tol: f64,
    /// The largest exponent must exceed this for chaos; the quasiperiodic
    /// band is `[-threshold, threshold]`.
    pub chaos_threshold: f64,
    pub reortho_every: usize,
    pub bound: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            n_transient: DEFAULT_TRANSIENT,
            n_keep: DEFAULT_KEEP,
            max_period: DEFAULT_MAX_PERIOD,
            tol: DEFAULT_PERIOD_TOL,
            chaos_threshold: DEFAULT_CHAOS_THRESHOLD,
            reortho_every: 1,
            bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }
}

impl ClassifyOptions {
    pub fn iterate_options(&self) -> IterateOptions {
        IterateOptions {
            n_transient: self.n_transient,
            n_keep: self.n_keep,
            bound: self.bound,
        }
    }
}

/// Classification together with the orbit it was made from.
#[derive(Debug, Clone)]
pub struct Classified {
    pub label: RegimeLabel,
    /// `None` if the orbit escaped during the transient.
    pub orbit: Option<Orbit>,
}

fn divergent(step: u64) -> RegimeLabel {
    RegimeLabel {
        regime: Regime::Divergent,
        evidence: Evidence {
            largest_exponent: None,
            period: None,
            bounded: false,
            divergence_step: Some(step),
        },
    }
}

/// Runs one orbit and labels its asymptotic regime.
pub fn classify_run(model: &Model, s0: &[f64], opts: &ClassifyOptions) -> Result<Classified> {
    model.validate()?;
    let orbit = match model.iterate(s0, &opts.iterate_options()) {
        Ok(o) => o,
        Err(Error::EmptyOrbit { step }) => {
            return Ok(Classified {
                label: divergent(step),
                orbit: None,
            })
        }
        Err(e) => return Err(e),
    };
    if let Some(d) = orbit.divergence {
        return Ok(Classified {
            label: divergent(d.step),
            orbit: Some(orbit),
        });
    }
    let period = detect_period(&orbit, opts.tol, opts.max_period);
    let largest =
        match model.lyapunov_spectrum(s0, opts.n_transient, opts.n_keep, opts.reortho_every) {
            Ok(spec) => spec.largest(),
            // the tangent run retraces the orbit, so it cannot escape where
            // iterate did not; keep the label total anyway
            Err(Error::Divergence { step, .. }) => {
                return Ok(Classified {
                    label: divergent(step),
                    orbit: Some(orbit),
                })
            }
            Err(e) => return Err(e),
        };
    let regime = match period {
        Some(1) => Regime::FixedPoint,
        Some(p) => Regime::Periodic(p),
        None if largest > opts.chaos_threshold => Regime::Chaotic,
        None if largest >= -opts.chaos_threshold => Regime::Quasiperiodic,
        None => Regime::FixedPoint,
    };
    Ok(Classified {
        label: RegimeLabel {
            regime,
            evidence: Evidence {
                largest_exponent: Some(largest),
                period,
                bounded: true,
                divergence_step: None,
            },
        },
        orbit: Some(orbit),
    })
}

pub fn classify(model: &Model, s0: &[f64], opts: &ClassifyOptions) -> Result<RegimeLabel> {
    classify_run(model, s0, opts).map(|c| c.label)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Continuation {
    /// Every grid value starts from the same initial state.
    Reset,
    /// Each run starts from the previous run's final state.
    Carry,
}

impl fmt::Display for Continuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Continuation::Reset => "reset",
            Continuation::Carry => "carry",
        })
    }
}

impl std::str::FromStr for Continuation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "reset" => Ok(Continuation::Reset),
            "carry" => Ok(Continuation::Carry),
            _ => Err(Error::InvalidInput(format!(
                "unknown continuation mode '{s}' (expected reset or carry)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub x_in: f64,
    /// State the run started from.
    pub start: Vec<f64>,
    pub label: RegimeLabel,
    /// Last retained points, flat, at most the sample cap.
    pub samples: Vec<f64>,
    /// Time average of the retained orbit; `None` when nothing was retained.
    pub mean: Option<Vec<f64>>,
    pub final_state: Option<Vec<f64>>,
}

impl SweepRow {
    pub fn sample_points(&self, dim: usize) -> std::slice::ChunksExact<'_, f64> {
        self.samples.chunks_exact(dim)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub parameter: &'static str,
    pub mode: Continuation,
    pub dim: usize,
    pub rows: Vec<SweepRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub classify: ClassifyOptions,
    pub samples: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            classify: ClassifyOptions::default(),
            samples: DEFAULT_SWEEP_SAMPLES,
        }
    }
}

fn sweep_row(model: &Model, x_in: f64, start: &[f64], opts: &SweepOptions) -> Result<SweepRow> {
    let m = model.with_x_in(x_in);
    let run = classify_run(&m, start, &opts.classify)?;
    let (samples, mean, final_state) = match &run.orbit {
        Some(o) if !o.is_empty() => {
            let d = o.dim();
            let keep = o.len().min(opts.samples);
            let flat = o.as_flat();
            (
                flat[flat.len() - keep * d..].to_vec(),
                Some(o.mean()),
                o.last().map(|s| s.to_vec()),
            )
        }
        _ => (Vec::new(), None, None),
    };
    Ok(SweepRow {
        x_in,
        start: start.to_vec(),
        label: run.label,
        samples,
        mean,
        final_state,
    })
}

fn check_grid(grid: &[f64], mode: Continuation) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("sweep grid is empty".into()));
    }
    if let Some(v) = grid.iter().find(|v| !v.is_finite() || **v < 0.0) {
        return Err(Error::InvalidParameter {
            name: "x_in",
            reason: format!("grid value {v} must be finite and non-negative"),
        });
    }
    let monotone = grid.windows(2).all(|w| w[1] > w[0]) || grid.windows(2).all(|w| w[1] < w[0]);
    if mode == Continuation::Carry && !monotone {
        return Err(Error::InvalidInput(
            "carry-mode sweep grid must be strictly monotone".into(),
        ));
    }
    if mode == Continuation::Reset {
        let mut sorted = grid.to_vec();
        sorted.sort_by(f64::total_cmp);
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidInput("sweep grid has repeated values".into()));
        }
    }
    Ok(())
}

/// Runs every grid value of x_in and classifies it. Reset-mode rows are
/// computed in parallel and do not depend on grid order; carry mode seeds
/// each run with the previous final state, falling back to `s0` after an
/// escape.
pub fn sweep_xin(
    model: &Model,
    s0: &[f64],
    grid: &[f64],
    mode: Continuation,
    opts: &SweepOptions,
) -> Result<SweepResult> {
    check_grid(grid, mode)?;
    model.with_x_in(grid[0]).validate()?;
    let rows = match mode {
        Continuation::Reset => grid
            .par_iter()
            .map(|&x| sweep_row(model, x, s0, opts))
            .collect::<Result<Vec<_>>>()?,
        Continuation::Carry => {
            let mut rows: Vec<SweepRow> = Vec::with_capacity(grid.len());
            let mut seed = s0.to_vec();
            for &x in grid {
                let row = sweep_row(model, x, &seed, opts)?;
                seed = match (&row.final_state, row.label.regime) {
                    (Some(f), r) if r != Regime::Divergent => f.clone(),
                    _ => s0.to_vec(),
                };
                rows.push(row);
            }
            rows
        }
    };
    Ok(SweepResult {
        parameter: "x_in",
        mode,
        dim: model.dim(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisPoint {
    pub x_in: f64,
    /// Largest componentwise `|up - down| / (1 + max(|up|, |down|))` of the
    /// time-averaged states; infinite when exactly one direction escaped.
    pub discrepancy: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisReport {
    /// Ascending grid.
    pub up: SweepResult,
    /// Descending grid.
    pub down: SweepResult,
    /// Ascending in x_in.
    pub points: Vec<HysteresisPoint>,
    /// Inclusive x_in ranges of consecutive flagged grid values.
    pub windows: Vec<(f64, f64)>,
    pub threshold: f64,
}

fn discrepancy(up: &SweepRow, down: &SweepRow) -> f64 {
    match (&up.mean, &down.mean) {
        (Some(a), Some(b))
            if up.label.regime != Regime::Divergent && down.label.regime != Regime::Divergent =>
        {
            a.iter()
                .zip(b)
                .map(|(u, d)| (u - d).abs() / (1.0 + u.abs().max(d.abs())))
                .fold(0.0, f64::max)
        }
        _ => {
            let up_div = up.label.regime == Regime::Divergent;
            let down_div = down.label.regime == Regime::Divergent;
            if up_div == down_div {
                0.0
            } else {
                f64::INFINITY
            }
        }
    }
}

/// Carry-mode sweeps up then down the same grid; grid values whose attractor
/// averages disagree by more than `threshold` are flagged.
pub fn hysteresis_scan(
    model: &Model,
    s0: &[f64],
    grid: &[f64],
    threshold: f64,
    opts: &SweepOptions,
) -> Result<HysteresisReport> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::InvalidParameter {
            name: "threshold",
            reason: format!("must be non-negative, got {threshold}"),
        });
    }
    check_grid(grid, Continuation::Carry)?;
    let mut ascending = grid.to_vec();
    ascending.sort_by(f64::total_cmp);
    let descending: Vec<f64> = ascending.iter().rev().copied().collect();
    let up = sweep_xin(model, s0, &ascending, Continuation::Carry, opts)?;
    let down = sweep_xin(model, s0, &descending, Continuation::Carry, opts)?;
    let n = ascending.len();
    let points: Vec<HysteresisPoint> = (0..n)
        .map(|i| {
            let d = discrepancy(&up.rows[i], &down.rows[n - 1 - i]);
            HysteresisPoint {
                x_in: ascending[i],
                discrepancy: d,
                flagged: d > threshold,
            }
        })
        .collect();
    let mut windows = Vec::new();
    let mut open: Option<f64> = None;
    for (i, p) in points.iter().enumerate() {
        match (p.flagged, open) {
            (true, None) => open = Some(p.x_in),
            (false, Some(start)) => {
                windows.push((start, points[i - 1].x_in));
                open = None;
            }
            _ => {}
        }
    }
    if let Some(start) = open {
        windows.push((start, points[n - 1].x_in));
    }
    Ok(HysteresisReport {
        up,
        down,
        points,
        windows,
        threshold,
    })
}

/// Evenly spaced grid from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count < 2 {
        return Err(Error::InvalidInput("a grid needs at least 2 points".into()));
    }
    if !(start.is_finite() && stop.is_finite()) || start == stop {
        return Err(Error::InvalidInput(format!(
            "grid bounds must be finite and distinct, got {start} and {stop}"
        )));
    }
    let step = (stop - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| {
            if i + 1 == count {
                stop
            } else {
                start + step * i as f64
            }
        })
        .collect())
}
