//! End-to-end runs driven by a [`RunConfig`]: orbit, sections, dimensions
//! and regime label, as used by the command-line tool.

use rayon::prelude::*;

use crate::cloud::PointCloud;
use crate::config::{InitialState, RunConfig};
use crate::dimension::{
    box_counting, correlation_dimension, DimensionEstimate, DimensionKind, ScaleSchedule,
};
use crate::dynamics::Orbit;
use crate::error::{Error, Result};
use crate::presets::{self, ExpectedDimensions};
use crate::regimes::{classify, RegimeLabel};
use crate::report::{list, num, Report};
use crate::sections::{auto_section, AutoSection, Axis};

/// Relative tolerance on reported dimensions.
pub const DIMENSION_TOLERANCE: f64 = 0.10;

/// Initial state and orbit chosen for a run.
#[derive(Debug, Clone)]
pub struct Start {
    pub state: Vec<f64>,
    /// Candidate index when the start was searched for.
    pub attempt: Option<usize>,
    pub orbit: Orbit,
}

/// Resolves the configured initial state and iterates the main orbit.
pub fn run_orbit(cfg: &RunConfig) -> Result<Start> {
    let opts = cfg.orbit_options();
    match &cfg.initial {
        InitialState::Search => {
            let found = cfg
                .model
                .find_bounded_start(&opts, cfg.seed, cfg.start_attempts)?;
            Ok(Start {
                state: found.state,
                attempt: Some(found.attempt),
                orbit: found.orbit,
            })
        }
        init => {
            let state = match init {
                InitialState::Explicit(v) => v.clone(),
                _ => vec![1.0; cfg.dim()],
            };
            let orbit = cfg.model.iterate(&state, &opts)?;
            Ok(Start {
                state,
                attempt: None,
                orbit,
            })
        }
    }
}

pub fn schedule_for(
    cloud: &PointCloud,
    kind: DimensionKind,
    cfg: &RunConfig,
) -> Result<ScaleSchedule> {
    let d = &cfg.dimension;
    match (d.delta_max, kind) {
        (Some(max), _) => ScaleSchedule::octaves(max, d.scales_per_octave, d.octaves),
        (None, DimensionKind::Box) => {
            ScaleSchedule::auto_tiling(cloud, d.scales_per_octave, d.octaves)
        }
        (None, DimensionKind::Correlation) => {
            ScaleSchedule::auto(cloud, d.scales_per_octave, d.octaves)
        }
    }
}

/// One dimension estimate under the configured schedule and fit rule.
/// `stream` separates the pair-sampling streams of different clouds.
pub fn estimate(
    cloud: &PointCloud,
    kind: DimensionKind,
    cfg: &RunConfig,
    stream: u64,
) -> Result<DimensionEstimate> {
    if cloud.len() < 2 {
        return Err(Error::Fit(format!(
            "cloud has {} points; at least 2 are needed",
            cloud.len()
        )));
    }
    let schedule = schedule_for(cloud, kind, cfg)?;
    let fit = &cfg.dimension.fit;
    match kind {
        DimensionKind::Box => box_counting(cloud, &schedule, None, fit),
        DimensionKind::Correlation => {
            let budget = cfg.dimension.pairs.budget_for(cloud.len());
            correlation_dimension(
                cloud,
                &schedule,
                budget,
                cfg.seed.wrapping_add(stream),
                None,
                fit,
            )
        }
    }
}

/// Box and correlation estimates of one cloud; failures are kept per kind.
#[derive(Debug, Clone)]
pub struct CloudDimensions {
    pub box_dim: std::result::Result<DimensionEstimate, String>,
    pub correlation: std::result::Result<DimensionEstimate, String>,
}

impl CloudDimensions {
    pub fn compute(cloud: &PointCloud, cfg: &RunConfig, stream: u64) -> Self {
        let (b, c) = rayon::join(
            || estimate(cloud, DimensionKind::Box, cfg, stream),
            || estimate(cloud, DimensionKind::Correlation, cfg, stream),
        );
        CloudDimensions {
            box_dim: b.map_err(|e| e.to_string()),
            correlation: c.map_err(|e| e.to_string()),
        }
    }

    pub fn get(&self, kind: DimensionKind) -> Option<f64> {
        match kind {
            DimensionKind::Box => self.box_dim.as_ref().ok().map(|e| e.value),
            DimensionKind::Correlation => self.correlation.as_ref().ok().map(|e| e.value),
        }
    }

    fn report(&self, r: &mut Report, prefix: &str) {
        for (kind, res) in [("box", &self.box_dim), ("correlation", &self.correlation)] {
            let name = format!("{prefix}.{kind}");
            match res {
                Ok(est) => {
                    r.estimate(&name, est);
                }
                Err(msg) => {
                    r.block(name).put("error", msg);
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct SectionResult {
    pub section: AutoSection,
    pub dims: CloudDimensions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub name: &'static str,
    pub expected: f64,
    pub measured: Option<f64>,
    pub within: bool,
}

impl Comparison {
    pub fn relative_error(&self) -> Option<f64> {
        self.measured
            .map(|m| (m - self.expected).abs() / self.expected)
    }
}

/// Everything a figure reproduction produced.
#[derive(Debug, Clone)]
pub struct Reproduction {
    pub start: Start,
    pub label: RegimeLabel,
    pub full: CloudDimensions,
    pub sections: Vec<SectionResult>,
    pub comparisons: Vec<Comparison>,
    pub advisory: bool,
}

impl Reproduction {
    /// True when every gated comparison is within tolerance.
    pub fn matches(&self) -> bool {
        self.advisory || self.comparisons.iter().all(|c| c.within)
    }

    pub fn section(&self, axis: Axis) -> Option<&SectionResult> {
        self.sections
            .iter()
            .find(|s| s.section.spec.drop_axis == axis)
    }
}

fn compare(
    expected: &ExpectedDimensions,
    full: &CloudDimensions,
    w: Option<&SectionResult>,
) -> Vec<Comparison> {
    let w_box = w.and_then(|s| s.dims.get(DimensionKind::Box));
    let w_corr = w.and_then(|s| s.dims.get(DimensionKind::Correlation));
    let measured = [
        w_box,
        w_corr,
        full.get(DimensionKind::Box),
        full.get(DimensionKind::Correlation),
    ];
    expected
        .entries()
        .iter()
        .zip(measured)
        .map(|(&(name, exp), m)| Comparison {
            name,
            expected: exp,
            measured: m,
            within: m.is_some_and(|v| (v - exp).abs() <= DIMENSION_TOLERANCE * exp),
        })
        .collect()
}

/// Orbit, regime label, axis sections and dimensions of every cloud; when
/// the configuration names a preset with reported dimensions, the measured
/// values are compared against them.
pub fn reproduce(cfg: &RunConfig) -> Result<Reproduction> {
    let start = run_orbit(cfg)?;
    let orbit = &start.orbit;
    if let Some(d) = orbit.divergence {
        return Err(Error::Divergence {
            step: d.step,
            component: d.component,
            value: d.value,
        });
    }
    let label = classify(&cfg.model, &start.state, &cfg.regime)?;
    let full_cloud = PointCloud::from_orbit(orbit);
    let full = CloudDimensions::compute(&full_cloud, cfg, 0);
    let sections = cfg
        .section
        .axes
        .par_iter()
        .enumerate()
        .map(|(i, &axis)| {
            let k = axis.index();
            let section = auto_section(
                orbit,
                axis,
                cfg.section.offsets[k],
                cfg.section.thicknesses[k],
                cfg.section.mode,
                cfg.section.candidates,
            )?;
            let dims = CloudDimensions::compute(&section.cloud, cfg, i as u64 + 1);
            Ok(SectionResult { section, dims })
        })
        .collect::<Result<Vec<_>>>()?;
    let preset = cfg.preset.as_deref().map(presets::preset).transpose()?;
    let (comparisons, advisory) = match preset {
        Some(p) if p.model == cfg.model => match p.expected {
            Some(exp) => {
                let w = sections
                    .iter()
                    .find(|s| s.section.spec.drop_axis == Axis::W);
                (compare(&exp, &full, w), p.advisory)
            }
            None => (Vec::new(), false),
        },
        _ => (Vec::new(), false),
    };
    Ok(Reproduction {
        start,
        label,
        full,
        sections,
        comparisons,
        advisory,
    })
}

pub fn orbit_block(r: &mut Report, start: &Start) {
    let o = &start.orbit;
    r.block("orbit")
        .put("start", list(&start.state))
        .put(
            "start_attempt",
            start.attempt.map_or("none".to_string(), |a| a.to_string()),
        )
        .put("transient", o.n_transient)
        .put("kept", o.len())
        .put(
            "escaped_at",
            o.divergence
                .map_or("none".to_string(), |d| d.step.to_string()),
        )
        .put("mean", list(&o.mean()));
    if let Some(last) = o.last() {
        r.put("last", list(last));
    }
}

impl Reproduction {
    pub fn to_report(&self, cfg: &RunConfig) -> Report {
        let mut r = Report::new();
        r.block("run")
            .put("command", "reproduce")
            .put("preset", cfg.preset.as_deref().unwrap_or("none"))
            .put("levels", cfg.dim());
        r.warnings(&cfg.warnings());
        orbit_block(&mut r, &self.start);
        r.label("regime", &self.label, cfg.regime.chaos_threshold);
        r.block("full").put("points", self.start.orbit.len());
        self.full.report(&mut r, "full");
        for s in &self.sections {
            let spec = &s.section.spec;
            let scan = &s.section.scan;
            let name = format!("section_{}", spec.drop_axis);
            r.block(name.clone())
                .put("axis", spec.drop_axis)
                .put("offset", num(spec.offset))
                .put("thickness", num(spec.thickness))
                .put("mode", format!("{:?}", spec.mode).to_lowercase())
                .put("points", s.section.cloud.len())
                .put("scan_candidates", scan.candidates.len())
                .put("scan_degenerate", scan.degenerate);
            s.dims.report(&mut r, &name);
        }
        if !self.comparisons.is_empty() {
            r.block("comparison")
                .put("tolerance", num(DIMENSION_TOLERANCE))
                .put("advisory", self.advisory);
            for c in &self.comparisons {
                r.put(
                    c.name,
                    format!(
                        "expected {} measured {} {}",
                        num(c.expected),
                        c.measured.map_or("none".to_string(), num),
                        if c.within { "ok" } else { "mismatch" }
                    ),
                );
            }
            r.put("status", if self.matches() { "match" } else { "mismatch" });
        }
        r
    }
}
