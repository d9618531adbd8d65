//! Acceptance criteria, one PASS/FAIL line each. Runs without the libtest
//! harness so every line is printed.
//!
//! A figure whose caption parameters admit no bounded orbit cannot be
//! reproduced at all; that failure is printed as FAIL and marked known. Any
//! other failure makes the process exit non-zero.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use filterlab::cli::run_command;
use filterlab::config::{parse_config, RunConfig};
use filterlab::dimension::{
    box_counting, correlation_counts, correlation_dimension, FitRule, PairBudget, ScaleSchedule,
    DEFAULT_OCTAVES, DEFAULT_SCALES_PER_OCTAVE,
};
use filterlab::export::cloud_to_csv;
use filterlab::pipeline::{reproduce, Reproduction};
use filterlab::presets::preset;
use filterlab::regimes::{classify, linear_grid, sweep_xin, Continuation, Regime, SweepOptions};
use filterlab::{Model, PointCloud};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

mod common;
use common::newton_fixed_point;

struct Outcome {
    pass: bool,
    detail: String,
    /// Reason a failure is expected.
    known: Option<&'static str>,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
        known: None,
    }
}

const UNBOUNDED: &str = "caption parameters give no bounded orbit";

fn random_model(rng: &mut ChaCha8Rng, dim: usize) -> Model {
    let n = if dim == 3 { 8 } else { 11 };
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..2.0)).collect();
    // x_in in (0, 10]
    v.push(10.0 - rng.gen_range(0.0..10.0));
    Model::from_values(&v).unwrap()
}

fn fixed_points() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for dim in [3, 4] {
        for _ in 0..1000 {
            let m = random_model(&mut rng, dim);
            let fp = m.fixed_point().unwrap();
            let next = m.step(&fp.state).unwrap();
            let scale = fp
                .state
                .iter()
                .fold(m.x_in(), |a, v| a.max(v.abs()))
                .max(1.0);
            for (a, b) in next.iter().zip(&fp.state) {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    let mut newton_gap = 0.0f64;
    for _ in 0..20 {
        let m = random_model(&mut rng, 4);
        let closed = m.fixed_point().unwrap().state;
        let solved = newton_fixed_point(&m);
        for (a, b) in closed.iter().zip(&solved) {
            newton_gap = newton_gap.max((a - b).abs() / a.max(1.0));
        }
    }
    outcome(
        worst <= 1e-9 && newton_gap <= 1e-9,
        format!("max relative residual {worst:.2e} over 2000 sets; 4-level formula vs Newton solve {newton_gap:.2e} over 20 sets"),
    )
}

fn mass_balance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for dim in [3, 4] {
        for _ in 0..1000 {
            let m = random_model(&mut rng, dim);
            let s: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..10.0)).collect();
            let next = m.step(&s).unwrap();
            let magnitude = s
                .iter()
                .chain(&next)
                .fold(m.x_in(), |a, v| a + v.abs())
                .max(1.0);
            worst = worst.max(m.mass_balance_residual(&s).unwrap().abs() / magnitude);
        }
    }
    outcome(
        worst <= 1e-9,
        format!("max relative residual {worst:.2e} over 2000 states"),
    )
}

fn jacobians() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for i in 0..100 {
        let dim = if i % 2 == 0 { 3 } else { 4 };
        let m = random_model(&mut rng, dim);
        let s: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.0..10.0)).collect();
        let jac = m.jacobian(&s).unwrap();
        for j in 0..dim {
            let mut hi = s.clone();
            let mut lo = s.clone();
            hi[j] += h;
            lo[j] -= h;
            let (fh, fl) = (m.step(&hi).unwrap(), m.step(&lo).unwrap());
            for r in 0..dim {
                worst = worst.max(((fh[r] - fl[r]) / (2.0 * h) - jac[r][j]).abs());
            }
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max entry deviation {worst:.2e} over 100 inputs"),
    )
}

/// `n` uniform points on the unit `k`-cube spanned by the first `k` axes of
/// `dim`-space, other coordinates held at a constant.
fn uniform_flat(k: usize, dim: usize, n: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels = ["x", "y", "z", "w"];
    let mut coords = Vec::with_capacity(n * dim);
    for _ in 0..n {
        for a in 0..dim {
            coords.push(if a < k { rng.gen::<f64>() } else { 0.3 });
        }
    }
    PointCloud::new(
        dim,
        labels[..dim].iter().map(|s| s.to_string()).collect(),
        coords,
    )
    .unwrap()
}

fn brute_force_pairs(cloud: &PointCloud, scales: &[f64]) -> Vec<u64> {
    let mut counts = vec![0u64; scales.len()];
    for i in 0..cloud.len() {
        for j in i + 1..cloud.len() {
            let d = cloud
                .point(i)
                .iter()
                .zip(cloud.point(j))
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            for (c, s) in counts.iter_mut().zip(scales) {
                if d < *s {
                    *c += 1;
                }
            }
        }
    }
    counts
}

fn dimension_oracles() -> Outcome {
    let rule = FitRule::default();
    let mut pass = true;
    let mut parts = Vec::new();
    for (k, dim) in [(1, 4), (2, 3), (3, 3), (3, 4)] {
        let c = uniform_flat(k, dim, 100_000, 10 + (k * dim) as u64);
        let boxes =
            ScaleSchedule::auto_tiling(&c, DEFAULT_SCALES_PER_OCTAVE, DEFAULT_OCTAVES).unwrap();
        let b = box_counting(&c, &boxes, None, &rule).unwrap().value;
        let radii = ScaleSchedule::auto(&c, DEFAULT_SCALES_PER_OCTAVE, DEFAULT_OCTAVES).unwrap();
        let r = correlation_dimension(&c, &radii, PairBudget::All, 0, None, &rule)
            .unwrap()
            .value;
        let ok = (b - k as f64).abs() <= 0.1 && (r - k as f64).abs() <= 0.1;
        pass &= ok;
        parts.push(format!("{k}-flat in {dim}D box {b:.3} corr {r:.3}"));
    }
    let mut exact = true;
    for dim in [3, 4] {
        let c = uniform_flat(dim, dim, 500, 99);
        let sched = ScaleSchedule::auto(&c, DEFAULT_SCALES_PER_OCTAVE, DEFAULT_OCTAVES).unwrap();
        let counts = correlation_counts(&c, &sched, PairBudget::All, 0)
            .unwrap()
            .counts;
        exact &= counts == brute_force_pairs(&c, sched.scales());
    }
    pass &= exact;
    parts.push(format!(
        "exact pair counts {}",
        if exact {
            "match brute force"
        } else {
            "DIFFER from brute force"
        }
    ));
    outcome(pass, parts.join("; "))
}

fn config(text: &str) -> RunConfig {
    parse_config(text).unwrap()
}

fn fig1_regime() -> Outcome {
    let ones = config("preset = fig1");
    let from_ones = filterlab::pipeline::run_orbit(&ones).unwrap();
    let cfg = config("preset = fig1\ninitial = search");
    let start = match filterlab::pipeline::run_orbit(&cfg) {
        Ok(s) => s,
        Err(e) => return outcome(false, format!("no bounded start: {e}")),
    };
    let bounded = !start.orbit.is_divergent() && start.orbit.len() == 1_000_000;
    let label = classify(&cfg.model, &start.state, &cfg.regime).unwrap();
    let lambda = label.evidence.largest_exponent.unwrap_or(f64::NAN);
    outcome(
        bounded && lambda > 0.0 && label.regime == Regime::Chaotic,
        format!(
            "all-ones start escapes at step {}; searched start (candidate {}) bounded over {} kept points, lambda_max {lambda:.4}, label {}",
            from_ones.orbit.divergence.map_or("none".into(), |d| d.step.to_string()),
            start.attempt.unwrap_or(0),
            start.orbit.len(),
            label.regime
        ),
    )
}

/// Runs a figure from the all-ones start and, if that escapes, from a
/// searched start.
fn reproduce_figure(name: &str) -> (Result<Reproduction, String>, String) {
    let ones = config(&format!("preset = {name}"));
    match reproduce(&ones) {
        Ok(r) => (Ok(r), "all-ones start".into()),
        Err(e) => {
            let note = format!("all-ones start: {e}");
            let searched = config(&format!("preset = {name}\ninitial = search"));
            match reproduce(&searched) {
                Ok(r) => (Ok(r), format!("{note}; searched start used")),
                Err(e2) => (Err(format!("{note}; start search: {e2}")), String::new()),
            }
        }
    }
}

fn comparison_detail(r: &Reproduction) -> String {
    r.comparisons
        .iter()
        .map(|c| {
            format!(
                "{} {} vs {}{}",
                c.name,
                c.measured.map_or("none".into(), |m| format!("{m:.3}")),
                c.expected,
                if c.within { "" } else { " (out)" }
            )
        })
        .collect::<Vec<_>>()
        .join(", ")
}

fn figure(name: &str, regime: Option<Regime>) -> Outcome {
    match reproduce_figure(name) {
        (Err(msg), _) => Outcome {
            known: Some(UNBOUNDED),
            ..outcome(false, format!("{name}: {msg}"))
        },
        (Ok(r), how) => {
            let regime_ok = regime.is_none_or(|want| r.label.regime == want);
            outcome(
                regime_ok && r.matches(),
                format!(
                    "{name} ({how}): label {}; {}",
                    r.label.regime,
                    comparison_detail(&r)
                ),
            )
        }
    }
}

/// Fig. 6 gated, with the fig5 values reported alongside but not gated.
fn fig6_with_advisory() -> Outcome {
    let mut six = figure("fig6", None);
    let five = match reproduce_figure("fig5") {
        (Err(msg), _) => format!("fig5 advisory: {msg}"),
        (Ok(r), how) => format!("fig5 advisory ({how}): {}", comparison_detail(&r)),
    };
    six.detail = format!("{}; {five}", six.detail);
    six
}

fn period_doubling() -> Outcome {
    let model = preset("fig2").unwrap().model;
    let grid = linear_grid(1.0, 17.75, 68).unwrap();
    let sweep = sweep_xin(
        &model,
        &[1.0; 3],
        &grid,
        Continuation::Reset,
        &SweepOptions::default(),
    )
    .unwrap();
    let mut route: Vec<(f64, Regime)> = Vec::new();
    for row in &sweep.rows {
        if route.last().is_none_or(|(_, r)| *r != row.label.regime) {
            route.push((row.x_in, row.label.regime));
        }
    }
    let shown: Vec<String> = route.iter().map(|(x, r)| format!("{r} from {x}")).collect();
    let ok = route.len() >= 3
        && route[0].1 == Regime::FixedPoint
        && route[1].1 == Regime::Periodic(2)
        && matches!(route[2].1, Regime::Periodic(4) | Regime::Chaotic);
    outcome(
        ok,
        format!("fig2 family, x_in 1..17.75: {}", shown.join(", ")),
    )
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    if let Ok(entries) = fs::read_dir(dir) {
        for e in entries.flatten() {
            files.insert(
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            );
        }
    }
    files
}

const BOUNDED_4D: &str = "system = 4
params.k_xy = 0.365
params.k_yx = 0.499
params.k_yz = 0.335
params.k_zy = 0.142
params.k_zw = 0.115
params.k_wz = 0.322
params.k_out = 0.875
params.p = 0.033
params.q = 0.075
params.r = 0.04
params.s = 0.025
params.x_in = 3.0
budget.keep = 200000
";

fn render_with_threads(cfg: &RunConfig, threads: usize) -> Vec<String> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .unwrap();
    pool.install(|| {
        let r = reproduce(cfg).unwrap();
        let mut out = vec![
            r.to_report(cfg).render(cfg),
            cloud_to_csv(&PointCloud::from_orbit(&r.start.orbit)),
        ];
        out.extend(r.sections.iter().map(|s| cloud_to_csv(&s.section.cloud)));
        out
    })
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig4");
    let out_str = out.to_str().unwrap();
    let mut runs = Vec::new();
    for threads in ["1", "4"] {
        let code = run_command([
            "filterlab",
            "--out",
            out_str,
            "--threads",
            threads,
            "reproduce",
            "fig4",
        ]);
        runs.push((code, snapshot(&out)));
        let _ = fs::remove_dir_all(&out);
    }
    let cli_same = runs[0] == runs[1] && !runs[0].1.is_empty();
    let files: Vec<&String> = runs[0].1.keys().collect();
    let cfg = config(BOUNDED_4D);
    let lib_same = render_with_threads(&cfg, 1) == render_with_threads(&cfg, 4);
    outcome(
        cli_same && lib_same,
        format!(
            "reproduce fig4 with 1 and 4 threads: exit {} / {}, files {files:?} {}; bounded 4-level run with 200000 points {}",
            runs[0].0,
            runs[1].0,
            if cli_same { "identical" } else { "DIFFER" },
            if lib_same { "identical" } else { "DIFFERS" }
        ),
    )
}

fn main() {
    let mut failed = 0;
    let mut unexpected = 0;
    let mut report = |n: usize, title: &str, run: &mut dyn FnMut() -> Outcome| {
        let t = Instant::now();
        let o = run();
        let status = match (o.pass, o.known) {
            (true, _) => "PASS".to_string(),
            (false, Some(why)) => format!("FAIL (known: {why})"),
            (false, None) => "FAIL".to_string(),
        };
        if !o.pass {
            failed += 1;
            if o.known.is_none() {
                unexpected += 1;
            }
        }
        println!(
            "criterion {n:>2} {status}: {title} [{:.1}s] {}",
            t.elapsed().as_secs_f64(),
            o.detail
        );
    };
    report(1, "fixed points", &mut fixed_points);
    report(2, "mass balance", &mut mass_balance);
    report(3, "jacobians", &mut jacobians);
    report(4, "dimension oracles", &mut dimension_oracles);
    report(5, "fig1 regime", &mut fig1_regime);
    report(6, "fig7 regime and dimensions", &mut || {
        figure("fig7", Some(Regime::Quasiperiodic))
    });
    report(7, "fig4 dimensions", &mut || figure("fig4", None));
    report(8, "fig6 dimensions", &mut fig6_with_advisory);
    report(9, "period-doubling route", &mut period_doubling);
    report(10, "determinism", &mut determinism);
    println!("{failed} of 10 criteria failed, {unexpected} unexpectedly");
    if unexpected > 0 {
        std::process::exit(1);
    }
}
