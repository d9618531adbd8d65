//! Run configuration in a line-based `key = value` format.
//!
//! Blank lines and `#` comments are ignored; keys are dotted lowercase
//! words. Every key not given takes its default, and [`RunConfig::echo`]
//! writes the fully resolved configuration back in the same format.
//!
//! ```text
//! preset = fig4
//! budget.keep = 200000
//! section.axes = w, x
//! section.w.thickness = 0.01
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::dimension::{FitRule, PairBudget, DEFAULT_OCTAVES, DEFAULT_SCALES_PER_OCTAVE};
use crate::dynamics::{
    IterateOptions, Model, DEFAULT_DIVERGENCE_BOUND, DEFAULT_START_ATTEMPTS, DEFAULT_TRANSIENT,
};
use crate::error::{Error, Result};
use crate::presets;
use crate::regimes::{
    ClassifyOptions, Continuation, SweepOptions, DEFAULT_CHAOS_THRESHOLD,
    DEFAULT_HYSTERESIS_THRESHOLD, DEFAULT_KEEP, DEFAULT_MAX_PERIOD, DEFAULT_PERIOD_TOL,
    DEFAULT_SWEEP_SAMPLES,
};
use crate::sections::{Axis, Direction, SectionMode, DEFAULT_SCAN_CANDIDATES};

/// Retained points of the main orbit when not configured.
pub const DEFAULT_ORBIT_KEEP: usize = 1_000_000;

const KEYS: &[&str] = &[
    "system",
    "preset",
    "initial",
    "initial.attempts",
    "budget.transient",
    "budget.keep",
    "budget.bound",
    "section.axes",
    "section.mode",
    "section.direction",
    "section.candidates",
    "section.x.offset",
    "section.x.thickness",
    "section.y.offset",
    "section.y.thickness",
    "section.z.offset",
    "section.z.thickness",
    "section.w.offset",
    "section.w.thickness",
    "dimension.scales_per_octave",
    "dimension.octaves",
    "dimension.delta_max",
    "dimension.pairs",
    "dimension.min_window",
    "dimension.r2_tolerance",
    "dimension.saturation",
    "dimension.min_pairs",
    "regime.transient",
    "regime.keep",
    "regime.max_period",
    "regime.tol",
    "regime.chaos_threshold",
    "regime.reortho_every",
    "sweep.start",
    "sweep.stop",
    "sweep.count",
    "sweep.mode",
    "sweep.samples",
    "sweep.threshold",
    "seed",
    "output",
    "strict",
];

#[derive(Debug, Clone, PartialEq)]
pub enum InitialState {
    /// Every level starts at 1.
    Ones,
    /// Seeded search for a start whose orbit stays bounded.
    Search,
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SectionConfig {
    pub axes: Vec<Axis>,
    pub mode: SectionMode,
    pub candidates: usize,
    /// Per-axis fixed offset, indexed by [`Axis::index`]; `None` scans.
    pub offsets: [Option<f64>; 4],
    /// Per-axis slab width; `None` uses 1% of the axis range.
    pub thicknesses: [Option<f64>; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairSetting {
    /// Exhaustive for small clouds, sampled for large ones.
    Auto,
    Fixed(PairBudget),
}

impl PairSetting {
    pub fn budget_for(&self, points: usize) -> PairBudget {
        match self {
            PairSetting::Auto => PairBudget::default_for(points),
            PairSetting::Fixed(b) => *b,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DimensionConfig {
    pub scales_per_octave: usize,
    pub octaves: usize,
    /// `None` derives the largest scale from the cloud extent.
    pub delta_max: Option<f64>,
    pub pairs: PairSetting,
    pub fit: FitRule,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub start: Option<f64>,
    pub stop: Option<f64>,
    pub count: usize,
    pub mode: Continuation,
    pub samples: usize,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub model: Model,
    pub initial: InitialState,
    pub start_attempts: usize,
    pub transient: usize,
    pub keep: usize,
    pub bound: f64,
    pub section: SectionConfig,
    pub dimension: DimensionConfig,
    pub regime: ClassifyOptions,
    pub sweep: SweepConfig,
    pub seed: u64,
    pub output: PathBuf,
    pub strict: bool,
}

struct Entry {
    line: usize,
    value: String,
}

struct Raw {
    entries: BTreeMap<String, Entry>,
}

fn key_error(key: &str, line: Option<usize>, reason: impl Into<String>) -> Error {
    Error::ConfigKey {
        key: key.to_string(),
        line: line.filter(|l| *l > 0),
        reason: reason.into(),
    }
}

fn lex(text: &str) -> Result<Vec<(usize, String, String)>> {
    let mut out = Vec::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let content = match raw_line.find('#') {
            Some(i) => &raw_line[..i],
            None => raw_line,
        };
        if content.trim().is_empty() {
            continue;
        }
        let syntax = |column: usize, message: &str| Error::ConfigSyntax {
            line,
            column,
            message: message.to_string(),
        };
        let eq = content.find('=').ok_or_else(|| {
            syntax(
                content.len() - content.trim_start().len() + 1,
                "expected `key = value`",
            )
        })?;
        let key_part = &content[..eq];
        let key = key_part.trim();
        let key_start = key_part.len() - key_part.trim_start().len();
        if key.is_empty() {
            return Err(syntax(eq + 1, "missing key before `=`"));
        }
        if let Some(bad) = key.char_indices().find(|(_, c)| {
            !(c.is_ascii_lowercase() || c.is_ascii_digit() || *c == '_' || *c == '.')
        }) {
            return Err(syntax(
                key_start + bad.0 + 1,
                "keys may contain only a-z, 0-9, `_` and `.`",
            ));
        }
        let value = content[eq + 1..].trim();
        if value.is_empty() {
            return Err(syntax(eq + 2, "missing value after `=`"));
        }
        out.push((line, key.to_string(), value.to_string()));
    }
    Ok(out)
}

fn known(key: &str) -> bool {
    KEYS.contains(&key) || key.strip_prefix("params.").is_some_and(|n| !n.is_empty())
}

impl Raw {
    fn from_lines(lines: Vec<(usize, String, String)>) -> Result<Raw> {
        let mut entries = BTreeMap::new();
        for (line, key, value) in lines {
            if !known(&key) {
                return Err(key_error(&key, Some(line), "unknown key"));
            }
            if let Some(prev) = entries.get(&key) {
                let prev: &Entry = prev;
                return Err(key_error(
                    &key,
                    Some(line),
                    format!("already set on line {}", prev.line),
                ));
            }
            entries.insert(key, Entry { line, value });
        }
        Ok(Raw { entries })
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.get(key)
    }

    fn parse<T>(
        &self,
        key: &str,
        default: T,
        conv: impl Fn(&str) -> std::result::Result<T, String>,
    ) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(e) => conv(&e.value).map_err(|reason| key_error(key, Some(e.line), reason)),
        }
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.get(key).map(|e| e.line)
    }
}

fn float(v: &str) -> std::result::Result<f64, String> {
    let x: f64 = v.parse().map_err(|_| format!("`{v}` is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

fn positive_float(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err(format!("must be > 0, got {v}"))
    }
}

fn non_negative_float(v: &str) -> std::result::Result<f64, String> {
    let x = float(v)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err(format!("must be >= 0, got {v}"))
    }
}

fn count(v: &str) -> std::result::Result<usize, String> {
    let n: usize = v
        .parse()
        .map_err(|_| format!("`{v}` is not a non-negative integer"))?;
    if n == 0 {
        Err("must be at least 1".into())
    } else {
        Ok(n)
    }
}

fn auto_or(
    v: &str,
    f: fn(&str) -> std::result::Result<f64, String>,
) -> std::result::Result<Option<f64>, String> {
    if v == "auto" {
        Ok(None)
    } else {
        f(v).map(Some)
    }
}

fn boolean(v: &str) -> std::result::Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{v}` is not true or false")),
    }
}

fn float_list(v: &str) -> std::result::Result<Vec<f64>, String> {
    v.split(',').map(|s| float(s.trim())).collect()
}

fn parse_pairs(v: &str) -> std::result::Result<PairSetting, String> {
    match v {
        "auto" => Ok(PairSetting::Auto),
        "all" => Ok(PairSetting::Fixed(PairBudget::All)),
        n => {
            let k: u64 = n
                .parse()
                .map_err(|_| format!("`{n}` is not auto, all or a pair count"))?;
            if k == 0 {
                Err("pair count must be at least 1".into())
            } else {
                Ok(PairSetting::Fixed(PairBudget::Sampled(k)))
            }
        }
    }
}

fn parse_axes(v: &str) -> std::result::Result<Vec<Axis>, String> {
    if v == "none" {
        return Ok(Vec::new());
    }
    let axes: Vec<Axis> = v
        .split(',')
        .map(|s| s.trim().parse())
        .collect::<std::result::Result<_, _>>()?;
    for (i, a) in axes.iter().enumerate() {
        if axes[..i].contains(a) {
            return Err(format!("axis {a} listed twice"));
        }
    }
    Ok(axes)
}

/// Parses a configuration. `overrides` are applied as if they replaced the
/// matching lines of `text`.
pub fn parse_config_with(text: &str, overrides: &[(&str, String)]) -> Result<RunConfig> {
    let mut lines = lex(text)?;
    for (key, value) in overrides {
        lines.retain(|(_, k, _)| k != key);
        // line 0 marks a value that came from the command line
        lines.push((0, key.to_string(), value.clone()));
    }
    resolve(&Raw::from_lines(lines)?)
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    parse_config_with(text, &[])
}

fn resolve(raw: &Raw) -> Result<RunConfig> {
    let preset = raw.get("preset").map(|e| e.value.clone());
    let preset_model = match &preset {
        Some(name) => Some(
            presets::preset(name)
                .map_err(|e| key_error("preset", raw.line("preset"), e.to_string()))?
                .model,
        ),
        None => None,
    };
    let system = raw.parse("system", None, |v| match v {
        "3" => Ok(Some(3)),
        "4" => Ok(Some(4)),
        _ => Err(format!("`{v}` is not 3 or 4")),
    })?;
    let dim = match (system, &preset_model) {
        (Some(d), Some(m)) if d != m.dim() => {
            return Err(key_error(
                "system",
                raw.line("system"),
                format!(
                    "preset {} is a {}-level system",
                    preset.as_deref().unwrap_or(""),
                    m.dim()
                ),
            ))
        }
        (Some(d), _) => d,
        (None, Some(m)) => m.dim(),
        (None, None) => {
            return Err(key_error("system", None, "set `system` or `preset`"));
        }
    };
    let names: &[&str] = if dim == 3 {
        &crate::dynamics::ParamsThree::NAMES
    } else {
        &crate::dynamics::ParamsFour::NAMES
    };
    for (key, e) in &raw.entries {
        if let Some(name) = key.strip_prefix("params.") {
            if !names.contains(&name) {
                return Err(key_error(
                    key,
                    Some(e.line),
                    format!("not a coefficient of the {dim}-level system"),
                ));
            }
        }
    }
    let mut values = Vec::with_capacity(names.len());
    for (i, name) in names.iter().enumerate() {
        let key = format!("params.{name}");
        let base = preset_model.map(|m| m.values()[i]);
        let v = raw.parse(&key, base, |v| float(v).map(Some))?;
        values.push(v.ok_or_else(|| key_error(&key, None, "required when no preset is given"))?);
    }
    let model = Model::from_values(&values)?;
    model.validate().map_err(|e| match e {
        Error::InvalidParameter { name, reason } => {
            let key = format!("params.{name}");
            let line = raw.line(&key);
            key_error(&key, line, reason)
        }
        other => other,
    })?;

    let initial = raw.parse("initial", InitialState::Ones, |v| match v {
        "ones" => Ok(InitialState::Ones),
        "search" => Ok(InitialState::Search),
        list => {
            let s = float_list(list)?;
            if s.len() != dim {
                Err(format!("{} components for a {dim}-level system", s.len()))
            } else {
                Ok(InitialState::Explicit(s))
            }
        }
    })?;

    let default_axes = if dim == 4 {
        // the w section first, as it carries the reference dimensions
        vec![Axis::W, Axis::X, Axis::Y, Axis::Z]
    } else {
        Vec::new()
    };
    let axes = raw.parse("section.axes", default_axes, parse_axes)?;
    if dim == 3 && !axes.is_empty() {
        return Err(key_error(
            "section.axes",
            raw.line("section.axes"),
            "sections need the 4-level system",
        ));
    }
    let direction = raw.parse("section.direction", Direction::Both, |v| v.parse())?;
    let mode = raw.parse("section.mode", SectionMode::Slab, |v| match v {
        "slab" => Ok(SectionMode::Slab),
        "crossing" => Ok(SectionMode::Crossing(direction)),
        _ => Err(format!("`{v}` is not slab or crossing")),
    })?;
    if mode == SectionMode::Slab && raw.get("section.direction").is_some() {
        return Err(key_error(
            "section.direction",
            raw.line("section.direction"),
            "only meaningful with section.mode = crossing",
        ));
    }
    let mut offsets = [None; 4];
    let mut thicknesses = [None; 4];
    for a in Axis::ALL {
        offsets[a.index()] =
            raw.parse(&format!("section.{a}.offset"), None, |v| auto_or(v, float))?;
        thicknesses[a.index()] = raw.parse(&format!("section.{a}.thickness"), None, |v| {
            auto_or(v, positive_float)
        })?;
    }
    let section = SectionConfig {
        axes,
        mode,
        candidates: raw.parse("section.candidates", DEFAULT_SCAN_CANDIDATES, |v| {
            let n = count(v)?;
            if n < 2 {
                Err("need at least 2 candidates".into())
            } else {
                Ok(n)
            }
        })?,
        offsets,
        thicknesses,
    };

    let default_fit = FitRule::default();
    let dimension = DimensionConfig {
        scales_per_octave: raw.parse(
            "dimension.scales_per_octave",
            DEFAULT_SCALES_PER_OCTAVE,
            count,
        )?,
        octaves: raw.parse("dimension.octaves", DEFAULT_OCTAVES, count)?,
        delta_max: raw.parse("dimension.delta_max", None, |v| auto_or(v, positive_float))?,
        pairs: raw.parse("dimension.pairs", PairSetting::Auto, parse_pairs)?,
        fit: FitRule {
            min_window: raw.parse("dimension.min_window", default_fit.min_window, |v| {
                let n = count(v)?;
                if n < 2 {
                    Err("a fit window needs at least 2 scales".into())
                } else {
                    Ok(n)
                }
            })?,
            r2_tolerance: raw.parse(
                "dimension.r2_tolerance",
                default_fit.r2_tolerance,
                non_negative_float,
            )?,
            saturation_fraction: raw.parse(
                "dimension.saturation",
                default_fit.saturation_fraction,
                |v| {
                    let x = positive_float(v)?;
                    if x > 1.0 {
                        Err(format!("must be in (0, 1], got {v}"))
                    } else {
                        Ok(x)
                    }
                },
            )?,
            min_pairs: raw.parse("dimension.min_pairs", default_fit.min_pairs, |v| {
                v.parse()
                    .map_err(|_| format!("`{v}` is not a non-negative integer"))
            })?,
        },
    };

    let regime = ClassifyOptions {
        n_transient: raw.parse("regime.transient", DEFAULT_TRANSIENT, |v| {
            v.parse()
                .map_err(|_| format!("`{v}` is not a non-negative integer"))
        })?,
        n_keep: raw.parse("regime.keep", DEFAULT_KEEP, count)?,
        max_period: raw.parse("regime.max_period", DEFAULT_MAX_PERIOD, count)?,
        tol: raw.parse("regime.tol", DEFAULT_PERIOD_TOL, positive_float)?,
        chaos_threshold: raw.parse(
            "regime.chaos_threshold",
            DEFAULT_CHAOS_THRESHOLD,
            non_negative_float,
        )?,
        reortho_every: raw.parse("regime.reortho_every", 1, count)?,
        bound: DEFAULT_DIVERGENCE_BOUND,
    };

    let sweep = SweepConfig {
        start: raw.parse("sweep.start", None, |v| non_negative_float(v).map(Some))?,
        stop: raw.parse("sweep.stop", None, |v| non_negative_float(v).map(Some))?,
        count: raw.parse("sweep.count", 41, |v| {
            let n = count(v)?;
            if n < 2 {
                Err("a sweep needs at least 2 grid values".into())
            } else {
                Ok(n)
            }
        })?,
        mode: raw.parse("sweep.mode", Continuation::Reset, |v| {
            v.parse::<Continuation>().map_err(|e| e.to_string())
        })?,
        samples: raw.parse("sweep.samples", DEFAULT_SWEEP_SAMPLES, count)?,
        threshold: raw.parse(
            "sweep.threshold",
            DEFAULT_HYSTERESIS_THRESHOLD,
            non_negative_float,
        )?,
    };
    if let (Some(a), Some(b)) = (sweep.start, sweep.stop) {
        if a == b {
            return Err(key_error(
                "sweep.stop",
                raw.line("sweep.stop"),
                "must differ from sweep.start",
            ));
        }
    }

    let bound = raw.parse("budget.bound", DEFAULT_DIVERGENCE_BOUND, positive_float)?;
    let regime = ClassifyOptions { bound, ..regime };

    Ok(RunConfig {
        preset,
        model,
        initial,
        start_attempts: raw.parse("initial.attempts", DEFAULT_START_ATTEMPTS, count)?,
        transient: raw.parse("budget.transient", DEFAULT_TRANSIENT, |v| {
            v.parse()
                .map_err(|_| format!("`{v}` is not a non-negative integer"))
        })?,
        keep: raw.parse("budget.keep", DEFAULT_ORBIT_KEEP, count)?,
        bound,
        section,
        dimension,
        regime,
        sweep,
        seed: raw.parse("seed", 0, |v| {
            v.parse()
                .map_err(|_| format!("`{v}` is not an unsigned integer"))
        })?,
        output: raw.parse("output", PathBuf::from("out"), |v| Ok(PathBuf::from(v)))?,
        strict: raw.parse("strict", false, boolean)?,
    })
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| format!("{x:?}"))
}

impl RunConfig {
    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn orbit_options(&self) -> IterateOptions {
        IterateOptions {
            n_transient: self.transient,
            n_keep: self.keep,
            bound: self.bound,
        }
    }

    pub fn sweep_options(&self) -> SweepOptions {
        SweepOptions {
            classify: self.regime,
            samples: self.sweep.samples,
        }
    }

    /// Coefficients outside (0, 1), reported when `strict` is set.
    pub fn warnings(&self) -> Vec<String> {
        if !self.strict {
            return Vec::new();
        }
        self.model
            .outside_unit_interval()
            .into_iter()
            .map(|n| format!("coefficient {n} lies outside (0, 1)"))
            .collect()
    }

    /// The resolved configuration in the input format. Parsing the echo
    /// yields an equal configuration.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("system", self.dim().to_string());
        if let Some(p) = &self.preset {
            put("preset", p.clone());
        }
        for (n, v) in self.model.names().iter().zip(self.model.values()) {
            put(&format!("params.{n}"), format!("{v:?}"));
        }
        put(
            "initial",
            match &self.initial {
                InitialState::Ones => "ones".into(),
                InitialState::Search => "search".into(),
                InitialState::Explicit(v) => v
                    .iter()
                    .map(|x| format!("{x:?}"))
                    .collect::<Vec<_>>()
                    .join(", "),
            },
        );
        put("initial.attempts", self.start_attempts.to_string());
        put("budget.transient", self.transient.to_string());
        put("budget.keep", self.keep.to_string());
        put("budget.bound", format!("{:?}", self.bound));
        put(
            "section.axes",
            if self.section.axes.is_empty() {
                "none".into()
            } else {
                self.section
                    .axes
                    .iter()
                    .map(|a| a.to_string())
                    .collect::<Vec<_>>()
                    .join(", ")
            },
        );
        match self.section.mode {
            SectionMode::Slab => put("section.mode", "slab".into()),
            SectionMode::Crossing(d) => {
                put("section.mode", "crossing".into());
                put("section.direction", d.to_string());
            }
        }
        put("section.candidates", self.section.candidates.to_string());
        for a in Axis::ALL {
            put(
                &format!("section.{a}.offset"),
                opt(self.section.offsets[a.index()]),
            );
            put(
                &format!("section.{a}.thickness"),
                opt(self.section.thicknesses[a.index()]),
            );
        }
        let d = &self.dimension;
        put(
            "dimension.scales_per_octave",
            d.scales_per_octave.to_string(),
        );
        put("dimension.octaves", d.octaves.to_string());
        put("dimension.delta_max", opt(d.delta_max));
        put(
            "dimension.pairs",
            match d.pairs {
                PairSetting::Auto => "auto".into(),
                PairSetting::Fixed(PairBudget::All) => "all".into(),
                PairSetting::Fixed(PairBudget::Sampled(n)) => n.to_string(),
            },
        );
        put("dimension.min_window", d.fit.min_window.to_string());
        put(
            "dimension.r2_tolerance",
            format!("{:?}", d.fit.r2_tolerance),
        );
        put(
            "dimension.saturation",
            format!("{:?}", d.fit.saturation_fraction),
        );
        put("dimension.min_pairs", d.fit.min_pairs.to_string());
        let r = &self.regime;
        put("regime.transient", r.n_transient.to_string());
        put("regime.keep", r.n_keep.to_string());
        put("regime.max_period", r.max_period.to_string());
        put("regime.tol", format!("{:?}", r.tol));
        put("regime.chaos_threshold", format!("{:?}", r.chaos_threshold));
        put("regime.reortho_every", r.reortho_every.to_string());
        if let Some(v) = self.sweep.start {
            put("sweep.start", format!("{v:?}"));
        }
        if let Some(v) = self.sweep.stop {
            put("sweep.stop", format!("{v:?}"));
        }
        put("sweep.count", self.sweep.count.to_string());
        put("sweep.mode", self.sweep.mode.to_string());
        put("sweep.samples", self.sweep.samples.to_string());
        put("sweep.threshold", format!("{:?}", self.sweep.threshold));
        put("seed", self.seed.to_string());
        put("output", self.output.display().to_string());
        put("strict", self.strict.to_string());
        s
    }
}
