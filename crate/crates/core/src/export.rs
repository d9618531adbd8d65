//! CSV and PLY point-cloud files, and CSV sweep tables.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::regimes::SweepResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CloudFormat {
    Csv,
    Ply,
}

impl FromStr for CloudFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(CloudFormat::Csv),
            "ply" => Ok(CloudFormat::Ply),
            _ => Err(Error::InvalidInput(format!(
                "unknown cloud format `{s}` (csv or ply)"
            ))),
        }
    }
}

impl CloudFormat {
    pub fn extension(self) -> &'static str {
        match self {
            CloudFormat::Csv => "csv",
            CloudFormat::Ply => "ply",
        }
    }
}

/// Header of axis labels, then one point per line. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn cloud_to_csv(cloud: &PointCloud) -> String {
    let mut s = cloud.labels().join(",");
    s.push('\n');
    for p in cloud.points() {
        let row: Vec<String> = p.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn cloud_from_csv(text: &str) -> Result<PointCloud> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidInput("empty CSV: missing header".into()))?;
    let labels: Vec<String> = header.split(',').map(|s| s.trim().to_string()).collect();
    let dim = labels.len();
    let mut coords = Vec::new();
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != dim {
            return Err(Error::InvalidInput(format!(
                "CSV line {}: {} fields, header has {dim}",
                i + 1,
                fields.len()
            )));
        }
        for f in fields {
            coords.push(f.trim().parse::<f64>().map_err(|_| {
                Error::InvalidInput(format!("CSV line {}: `{f}` is not a number", i + 1))
            })?);
        }
    }
    PointCloud::new(dim, labels, coords)
}

/// ASCII PLY 1.0 with one double-precision vertex per point. Vertex
/// properties are always named `x y z`; the cloud's own axis labels are kept
/// in a comment.
pub fn cloud_to_ply(cloud: &PointCloud) -> Result<String> {
    if cloud.dim() != 3 {
        return Err(Error::InvalidInput(format!(
            "PLY export needs a 3-dimensional cloud, got {} dimensions",
            cloud.dim()
        )));
    }
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "comment axes {}", cloud.labels().join(" "));
    if !cloud.provenance.source.is_empty() {
        let _ = writeln!(s, "comment source {}", cloud.provenance.source);
    }
    let _ = writeln!(s, "element vertex {}", cloud.len());
    s.push_str("property double x\nproperty double y\nproperty double z\nend_header\n");
    for p in cloud.points() {
        let _ = writeln!(s, "{:?} {:?} {:?}", p[0], p[1], p[2]);
    }
    Ok(s)
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn export_cloud(cloud: &PointCloud, format: CloudFormat, path: &Path) -> Result<()> {
    let text = match format {
        CloudFormat::Csv => cloud_to_csv(cloud),
        CloudFormat::Ply => cloud_to_ply(cloud)?,
    };
    write_file(path, &text)
}

pub fn import_cloud(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cloud = cloud_from_csv(&text)?;
    cloud.provenance.source = path.display().to_string();
    Ok(cloud)
}

const STATE_LABELS: [&str; 4] = ["x", "y", "z", "w"];

/// One row per grid value: label, evidence and time-averaged state.
pub fn sweep_summary_csv(sweep: &SweepResult) -> String {
    let labels = &STATE_LABELS[..sweep.dim];
    let mut s = format!("{},regime,period,lambda_max,escaped_at", sweep.parameter);
    for l in labels {
        let _ = write!(s, ",mean_{l}");
    }
    s.push('\n');
    for row in &sweep.rows {
        let ev = &row.label.evidence;
        let _ = write!(
            s,
            "{:?},{},{},{},{}",
            row.x_in,
            row.label.regime,
            ev.period.map(|p| p.to_string()).unwrap_or_default(),
            ev.largest_exponent
                .map(|l| format!("{l:?}"))
                .unwrap_or_default(),
            ev.divergence_step
                .map(|d| d.to_string())
                .unwrap_or_default(),
        );
        match &row.mean {
            Some(m) => m.iter().for_each(|v| {
                let _ = write!(s, ",{v:?}");
            }),
            None => labels.iter().for_each(|_| s.push(',')),
        }
        s.push('\n');
    }
    s
}

/// Retained attractor samples, one point per line, for bifurcation plots.
pub fn sweep_samples_csv(sweep: &SweepResult) -> String {
    let mut s = format!(
        "{},{}\n",
        sweep.parameter,
        STATE_LABELS[..sweep.dim].join(",")
    );
    for row in &sweep.rows {
        for p in row.sample_points(sweep.dim) {
            let _ = write!(s, "{:?}", row.x_in);
            for v in p {
                let _ = write!(s, ",{v:?}");
            }
            s.push('\n');
        }
    }
    s
}
