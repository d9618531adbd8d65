//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure
//! (including divergent orbits), 3 reproduced dimensions outside tolerance.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::cloud::PointCloud;
use crate::config::{parse_config_with, RunConfig};
use crate::dimension::DimensionKind;
use crate::error::{Error, Result};
use crate::export::{
    export_cloud, import_cloud, sweep_samples_csv, sweep_summary_csv, write_file, CloudFormat,
};
use crate::pipeline::{self, orbit_block, CloudDimensions};
use crate::regimes::{self, hysteresis_scan, linear_grid, sweep_xin};
use crate::report::{list, num, Report};
use crate::sections::auto_section;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "filterlab",
    version,
    about = "Simulate and analyse multi-level filter maps"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file in `key = value` format.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Figure preset (fig1 ... fig7).
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Seed for start search and pair sampling.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Initial state: `ones`, `search` or comma-separated values.
    #[arg(long, global = true, value_name = "STATE", allow_hyphen_values = true)]
    initial: Option<String>,
    /// Retained orbit points.
    #[arg(long, global = true)]
    keep: Option<String>,
    /// Discarded transient iterations.
    #[arg(long, global = true)]
    transient: Option<String>,
    /// Extra configuration entry, repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Ply,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Box,
    Correlation,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Iterate the map and write the retained orbit.
    Simulate,
    /// Cut the orbit with axis-aligned sections and export the clouds.
    Section {
        #[arg(long, value_enum, default_value = "both")]
        format: FormatArg,
    },
    /// Box-counting and correlation dimensions of the orbit or of a CSV cloud.
    Dimension {
        /// Point cloud to analyse instead of a simulated orbit.
        #[arg(long, value_name = "CSV")]
        input: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "both")]
        kind: KindArg,
    },
    /// Label the asymptotic regime and print the Lyapunov spectrum.
    Classify,
    /// Sweep x_in over a grid and label every value.
    Sweep {
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        stop: Option<String>,
        #[arg(long)]
        count: Option<String>,
        /// reset or carry.
        #[arg(long)]
        mode: Option<String>,
    },
    /// Carry-mode sweeps up and down x_in, flagging disagreeing attractors.
    Hysteresis {
        #[arg(long)]
        start: Option<String>,
        #[arg(long)]
        stop: Option<String>,
        #[arg(long)]
        count: Option<String>,
    },
    /// Print the stationary state and its residual.
    FixedPoint,
    /// Full figure pipeline: orbit, sections, dimensions and comparison.
    Reproduce {
        /// Preset to reproduce (fig1 ... fig7).
        figure: String,
    },
}

fn exit_code(err: &Error) -> i32 {
    match err {
        Error::ConfigSyntax { .. }
        | Error::ConfigKey { .. }
        | Error::InvalidParameter { .. }
        | Error::InvalidInput(_) => EXIT_USAGE,
        _ => EXIT_RUNTIME,
    }
}

fn load_config(common: &Common, extra: &[(&str, Option<String>)]) -> Result<RunConfig> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    let mut overrides: Vec<(&str, String)> = Vec::new();
    let mut add = |k: &'static str, v: &Option<String>| {
        if let Some(v) = v {
            overrides.push((k, v.clone()));
        }
    };
    add("preset", &common.preset);
    add(
        "output",
        &common.out.as_ref().map(|p| p.display().to_string()),
    );
    add("seed", &common.seed.map(|s| s.to_string()));
    add("initial", &common.initial);
    add("budget.keep", &common.keep);
    add("budget.transient", &common.transient);
    for (k, v) in extra {
        if let Some(v) = v {
            overrides.push((k, v.clone()));
        }
    }
    for item in &common.set {
        let (k, v) = item
            .split_once('=')
            .ok_or_else(|| Error::InvalidInput(format!("--set expects KEY=VALUE, got `{item}`")))?;
        overrides.push((k.trim(), v.trim().to_string()));
    }
    parse_config_with(&text, &overrides)
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn write_report(r: &Report, cfg: &RunConfig, name: &str) -> Result<()> {
    let path = cfg.output.join(name);
    r.write(cfg, &path)?;
    announce(&path);
    Ok(())
}

fn run_header(command: &str, cfg: &RunConfig) -> Report {
    let mut r = Report::new();
    r.block("run")
        .put("command", command)
        .put("preset", cfg.preset.as_deref().unwrap_or("none"))
        .put("levels", cfg.dim());
    r.warnings(&cfg.warnings());
    r
}

fn simulate(cfg: &RunConfig) -> Result<i32> {
    let start = pipeline::run_orbit(cfg)?;
    let mut r = run_header("simulate", cfg);
    orbit_block(&mut r, &start);
    let path = cfg.output.join("orbit.csv");
    export_cloud(
        &PointCloud::from_orbit(&start.orbit),
        CloudFormat::Csv,
        &path,
    )?;
    announce(&path);
    write_report(&r, cfg, "report.txt")?;
    if let Some(d) = start.orbit.divergence {
        eprintln!(
            "orbit escaped at step {}; retained points end there",
            d.step
        );
        return Ok(EXIT_RUNTIME);
    }
    Ok(EXIT_OK)
}

fn section(cfg: &RunConfig, format: FormatArg) -> Result<i32> {
    if cfg.section.axes.is_empty() {
        return Err(Error::InvalidInput(
            "no section axes configured; sections need the 4-level system".into(),
        ));
    }
    let start = pipeline::run_orbit(cfg)?;
    let mut r = run_header("section", cfg);
    orbit_block(&mut r, &start);
    for &axis in &cfg.section.axes {
        let k = axis.index();
        let s = auto_section(
            &start.orbit,
            axis,
            cfg.section.offsets[k],
            cfg.section.thicknesses[k],
            cfg.section.mode,
            cfg.section.candidates,
        )?;
        r.block(format!("section_{axis}"))
            .put("offset", num(s.spec.offset))
            .put("thickness", num(s.spec.thickness))
            .put("points", s.cloud.len())
            .put("scan_degenerate", s.scan.degenerate);
        for (i, (c, n)) in s.scan.candidates.iter().enumerate() {
            r.put(format!("scan.{i:02}"), format!("{} {n}", num(*c)));
        }
        if s.cloud.is_empty() {
            eprintln!("warning: section across {axis} is empty");
        }
        let formats: &[CloudFormat] = match format {
            FormatArg::Csv => &[CloudFormat::Csv],
            FormatArg::Ply => &[CloudFormat::Ply],
            FormatArg::Both => &[CloudFormat::Csv, CloudFormat::Ply],
        };
        for f in formats {
            let path = cfg.output.join(format!("section_{axis}.{}", f.extension()));
            export_cloud(&s.cloud, *f, &path)?;
            announce(&path);
        }
    }
    write_report(&r, cfg, "report.txt")?;
    Ok(EXIT_OK)
}

fn dimension(cfg: &RunConfig, input: Option<&Path>, kind: KindArg) -> Result<i32> {
    let mut r = run_header("dimension", cfg);
    let cloud = match input {
        Some(p) => {
            r.put("input", p.display());
            import_cloud(p)?
        }
        None => {
            let start = pipeline::run_orbit(cfg)?;
            orbit_block(&mut r, &start);
            PointCloud::from_orbit(&start.orbit)
        }
    };
    let kinds: &[DimensionKind] = match kind {
        KindArg::Box => &[DimensionKind::Box],
        KindArg::Correlation => &[DimensionKind::Correlation],
        KindArg::Both => &[DimensionKind::Box, DimensionKind::Correlation],
    };
    let mut failed = false;
    for &k in kinds {
        match pipeline::estimate(&cloud, k, cfg, 0) {
            Ok(est) => {
                println!(
                    "{k} dimension {:.4} +- {:.4} (R2 {:.5})",
                    est.value, est.stderr, est.r2
                );
                r.estimate(&format!("cloud.{k}"), &est);
            }
            Err(e) => {
                eprintln!("{k} dimension: {e}");
                r.block(format!("cloud.{k}")).put("error", &e);
                failed = true;
            }
        }
    }
    write_report(&r, cfg, "report.txt")?;
    Ok(if failed { EXIT_RUNTIME } else { EXIT_OK })
}

fn classify(cfg: &RunConfig) -> Result<i32> {
    let state = match &cfg.initial {
        crate::config::InitialState::Search => pipeline::run_orbit(cfg)?.state,
        crate::config::InitialState::Explicit(v) => v.clone(),
        crate::config::InitialState::Ones => vec![1.0; cfg.dim()],
    };
    let label = regimes::classify(&cfg.model, &state, &cfg.regime)?;
    println!("{label}");
    let mut r = run_header("classify", cfg);
    r.block("start").put("state", list(&state));
    r.label("regime", &label, cfg.regime.chaos_threshold);
    if label.evidence.bounded {
        let spec = cfg.model.lyapunov_spectrum(
            &state,
            cfg.regime.n_transient,
            cfg.regime.n_keep,
            cfg.regime.reortho_every,
        )?;
        println!("lyapunov spectrum: {}", list(&spec.exponents));
        r.spectrum("lyapunov", &spec);
    }
    write_report(&r, cfg, "report.txt")?;
    Ok(EXIT_OK)
}

fn grid_of(cfg: &RunConfig) -> Result<Vec<f64>> {
    let x = cfg.model.x_in();
    let start = cfg.sweep.start.unwrap_or(0.0);
    let stop = cfg.sweep.stop.unwrap_or(x);
    linear_grid(start, stop, cfg.sweep.count)
}

fn start_state(cfg: &RunConfig) -> Vec<f64> {
    match &cfg.initial {
        crate::config::InitialState::Explicit(v) => v.clone(),
        _ => vec![1.0; cfg.dim()],
    }
}

fn sweep(cfg: &RunConfig) -> Result<i32> {
    let grid = grid_of(cfg)?;
    let result = sweep_xin(
        &cfg.model,
        &start_state(cfg),
        &grid,
        cfg.sweep.mode,
        &cfg.sweep_options(),
    )?;
    let mut r = run_header("sweep", cfg);
    r.block("sweep")
        .put("parameter", result.parameter)
        .put("mode", result.mode)
        .put("points", result.rows.len());
    for (i, row) in result.rows.iter().enumerate() {
        r.put(
            format!("row.{i:03}"),
            format!("{} {}", num(row.x_in), row.label),
        );
        println!("x_in {} {}", num(row.x_in), row.label.regime);
    }
    for (name, text) in [
        ("sweep_summary.csv", sweep_summary_csv(&result)),
        ("sweep_samples.csv", sweep_samples_csv(&result)),
    ] {
        let path = cfg.output.join(name);
        write_file(&path, &text)?;
        announce(&path);
    }
    write_report(&r, cfg, "report.txt")?;
    Ok(EXIT_OK)
}

fn hysteresis(cfg: &RunConfig) -> Result<i32> {
    let grid = grid_of(cfg)?;
    let rep = hysteresis_scan(
        &cfg.model,
        &start_state(cfg),
        &grid,
        cfg.sweep.threshold,
        &cfg.sweep_options(),
    )?;
    let mut r = run_header("hysteresis", cfg);
    r.block("hysteresis")
        .put("threshold", num(rep.threshold))
        .put("windows", rep.windows.len());
    for (i, (a, b)) in rep.windows.iter().enumerate() {
        r.put(format!("window.{i}"), format!("{}, {}", num(*a), num(*b)));
        println!("hysteresis window x_in in [{}, {}]", num(*a), num(*b));
    }
    let n = rep.points.len();
    let mut csv = String::from("x_in,discrepancy,flagged,up,down\n");
    for (i, p) in rep.points.iter().enumerate() {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            num(p.x_in),
            num(p.discrepancy),
            p.flagged,
            rep.up.rows[i].label.regime,
            rep.down.rows[n - 1 - i].label.regime
        ));
    }
    let path = cfg.output.join("hysteresis.csv");
    write_file(&path, &csv)?;
    announce(&path);
    if rep.windows.is_empty() {
        println!(
            "no hysteresis windows above threshold {}",
            num(rep.threshold)
        );
    }
    write_report(&r, cfg, "report.txt")?;
    Ok(EXIT_OK)
}

fn fixed_point(cfg: &RunConfig) -> Result<i32> {
    let fp = cfg.model.fixed_point()?;
    let names = ["x", "y", "z", "w"];
    let mut out = std::io::stdout().lock();
    for (n, v) in names.iter().zip(&fp.state) {
        let _ = writeln!(out, "{n} = {}", num(*v));
    }
    let _ = writeln!(out, "residual = {}", num(fp.residual));
    Ok(EXIT_OK)
}

fn reproduce(cfg: &RunConfig) -> Result<i32> {
    let rep = match pipeline::reproduce(cfg) {
        Ok(rep) => rep,
        Err(e) if e.is_divergence() => {
            let mut r = run_header("reproduce", cfg);
            r.block("orbit").put("status", "divergent").put("error", &e);
            write_report(&r, cfg, "report.txt")?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let full = PointCloud::from_orbit(&rep.start.orbit);
    let path = cfg.output.join("orbit.csv");
    export_cloud(&full, CloudFormat::Csv, &path)?;
    announce(&path);
    for s in &rep.sections {
        for f in [CloudFormat::Csv, CloudFormat::Ply] {
            let path = cfg.output.join(format!(
                "section_{}.{}",
                s.section.spec.drop_axis,
                f.extension()
            ));
            export_cloud(&s.section.cloud, f, &path)?;
            announce(&path);
        }
    }
    let print = |name: &str, d: &CloudDimensions| {
        for (kind, res) in [("box", &d.box_dim), ("correlation", &d.correlation)] {
            match res {
                Ok(e) => println!("{name} {kind} {:.4}", e.value),
                Err(msg) => println!("{name} {kind} failed: {msg}"),
            }
        }
    };
    println!("regime {}", rep.label);
    print("full", &rep.full);
    for s in &rep.sections {
        print(&format!("section_{}", s.section.spec.drop_axis), &s.dims);
    }
    for c in &rep.comparisons {
        println!(
            "{} expected {} measured {} {}",
            c.name,
            c.expected,
            c.measured.map_or("none".to_string(), |m| format!("{m:.4}")),
            if c.within { "ok" } else { "MISMATCH" }
        );
    }
    write_report(&rep.to_report(cfg), cfg, "report.txt")?;
    if rep.matches() {
        Ok(EXIT_OK)
    } else {
        eprintln!("reproduced dimensions fall outside the tolerance");
        Ok(EXIT_MISMATCH)
    }
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let cfg = match &cli.command {
        Command::Sweep {
            start,
            stop,
            count,
            mode,
        } => load_config(
            &cli.common,
            &[
                ("sweep.start", start.clone()),
                ("sweep.stop", stop.clone()),
                ("sweep.count", count.clone()),
                ("sweep.mode", mode.clone()),
            ],
        )?,
        Command::Hysteresis { start, stop, count } => load_config(
            &cli.common,
            &[
                ("sweep.start", start.clone()),
                ("sweep.stop", stop.clone()),
                ("sweep.count", count.clone()),
            ],
        )?,
        Command::Reproduce { figure } => {
            load_config(&cli.common, &[("preset", Some(figure.clone()))])?
        }
        _ => load_config(&cli.common, &[])?,
    };
    for w in cfg.warnings() {
        eprintln!("warning: {w}");
    }
    match &cli.command {
        Command::Simulate => simulate(&cfg),
        Command::Section { format } => section(&cfg, *format),
        Command::Dimension { input, kind } => dimension(&cfg, input.as_deref(), *kind),
        Command::Classify => classify(&cfg),
        Command::Sweep { .. } => sweep(&cfg),
        Command::Hysteresis { .. } => hysteresis(&cfg),
        Command::FixedPoint => fixed_point(&cfg),
        Command::Reproduce { .. } => reproduce(&cfg),
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit code. Diagnostics go to standard error.
pub fn run_command<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
                    EXIT_OK
                }
                _ => EXIT_USAGE,
            };
        }
    };
    let run = || match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    };
    match cli.common.threads {
        Some(0) => {
            eprintln!("error: --threads must be at least 1");
            EXIT_USAGE
        }
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(run),
            Err(e) => {
                eprintln!("error: cannot start thread pool: {e}");
                EXIT_RUNTIME
            }
        },
        None => run(),
    }
}
