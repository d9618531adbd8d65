//! Plain-text run reports.
//!
//! A report is a list of `[section]` blocks of `key = value` lines, written
//! in insertion order so the same run always yields the same bytes. The last
//! block holds the echoed configuration.

use std::fmt::Write as _;
use std::path::Path;

use crate::config::RunConfig;
use crate::dimension::DimensionEstimate;
use crate::error::Result;
use crate::export::write_file;
use crate::regimes::{LyapunovSpectrum, RegimeLabel};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    blocks: Vec<(String, Vec<(String, String)>)>,
}

pub(crate) fn num(v: f64) -> String {
    format!("{v:?}")
}

pub(crate) fn list(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(", ")
}

impl Report {
    pub fn new() -> Self {
        Report::default()
    }

    /// Starts a new block; subsequent [`Report::put`] calls add to it.
    pub fn block(&mut self, name: impl Into<String>) -> &mut Self {
        self.blocks.push((name.into(), Vec::new()));
        self
    }

    pub fn put(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        if self.blocks.is_empty() {
            self.block("run");
        }
        self.blocks
            .last_mut()
            .unwrap()
            .1
            .push((key.into(), value.to_string()));
        self
    }

    /// Value of `key` in the first block called `block`.
    pub fn get(&self, block: &str, key: &str) -> Option<&str> {
        self.blocks
            .iter()
            .find(|(b, _)| b == block)
            .and_then(|(_, kv)| kv.iter().find(|(k, _)| k == key))
            .map(|(_, v)| v.as_str())
    }

    pub fn estimate(&mut self, name: &str, est: &DimensionEstimate) -> &mut Self {
        let (hi, lo) = est.fit_range();
        self.block(name)
            .put("kind", est.kind)
            .put("value", num(est.value))
            .put("stderr", num(est.stderr))
            .put("r2", num(est.r2))
            .put("fit_scales", format!("{}, {}", num(hi), num(lo)))
            .put(
                "fit_rows",
                format!("{}, {}", est.fit_rows.0, est.fit_rows.1),
            )
            .put("points", est.points)
            .put(
                "sampled_pairs",
                est.sampled_pairs
                    .map_or("none".to_string(), |n| n.to_string()),
            )
            .put("degenerate", est.degenerate);
        for (i, row) in est.table.iter().enumerate() {
            self.put(
                format!("table.{i:02}"),
                format!("{} {} {}", num(row.scale), num(row.value), row.count),
            );
        }
        self
    }

    pub fn label(&mut self, name: &str, label: &RegimeLabel, threshold: f64) -> &mut Self {
        let ev = &label.evidence;
        self.block(name)
            .put("regime", label.regime)
            .put(
                "largest_exponent",
                ev.largest_exponent.map_or("none".to_string(), num),
            )
            .put(
                "period",
                ev.period.map_or("none".to_string(), |p| p.to_string()),
            )
            .put("bounded", ev.bounded)
            .put(
                "escaped_at",
                ev.divergence_step
                    .map_or("none".to_string(), |s| s.to_string()),
            )
            .put("chaos_threshold", num(threshold))
    }

    pub fn spectrum(&mut self, name: &str, spec: &LyapunovSpectrum) -> &mut Self {
        self.block(name)
            .put("exponents", list(&spec.exponents))
            .put("sum", num(spec.sum()))
            .put("iterations", spec.iterations)
            .put("reortho_every", spec.reortho_every)
    }

    pub fn warnings(&mut self, warnings: &[String]) -> &mut Self {
        if !warnings.is_empty() {
            self.block("warnings");
            for (i, w) in warnings.iter().enumerate() {
                self.put(format!("warning.{i}"), w);
            }
        }
        self
    }

    /// Renders every block, then the echoed configuration.
    pub fn render(&self, config: &RunConfig) -> String {
        let mut s = String::new();
        for (name, kv) in &self.blocks {
            let _ = writeln!(s, "[{name}]");
            for (k, v) in kv {
                let _ = writeln!(s, "{k} = {v}");
            }
            s.push('\n');
        }
        s.push_str("[config]\n");
        s.push_str(&config.echo());
        s
    }

    pub fn write(&self, config: &RunConfig, path: &Path) -> Result<()> {
        write_file(path, &self.render(config))
    }
}

/// The `[config]` block of a rendered report, ready to be parsed again.
pub fn embedded_config(report: &str) -> Option<&str> {
    report
        .find("[config]\n")
        .map(|i| &report[i + "[config]\n".len()..])
}
