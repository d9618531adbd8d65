//! Three-dimensional sections of four-dimensional orbits.
//!
//! A section fixes one coordinate (the dropped axis) at an offset `c` and
//! keeps the other three. The default slab mode keeps every orbit point
//! within `eps / 2` of the hyperplane; crossing mode interpolates between
//! consecutive iterates that straddle it.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cloud::{PointCloud, Provenance};
use crate::dynamics::Orbit;
use crate::error::{Error, Result};

/// Candidate count used when the offset is chosen automatically.
pub const DEFAULT_SCAN_CANDIDATES: usize = 32;

/// Auto thickness is this fraction of the axis range.
pub const AUTO_THICKNESS_FRACTION: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Axis {
    X,
    Y,
    Z,
    W,
}

impl Axis {
    pub const ALL: [Axis; 4] = [Axis::X, Axis::Y, Axis::Z, Axis::W];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn label(self) -> &'static str {
        ["x", "y", "z", "w"][self.index()]
    }

    /// The three axes left after dropping `self`, in phase-space order.
    pub fn remaining(self) -> [Axis; 3] {
        let mut out = [Axis::X; 3];
        let mut k = 0;
        for a in Axis::ALL {
            if a != self {
                out[k] = a;
                k += 1;
            }
        }
        out
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Axis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "x" => Ok(Axis::X),
            "y" => Ok(Axis::Y),
            "z" => Ok(Axis::Z),
            "w" => Ok(Axis::W),
            other => Err(format!("unknown axis `{other}` (expected x, y, z or w)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascending,
    Descending,
    Both,
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Ascending => "ascending",
            Direction::Descending => "descending",
            Direction::Both => "both",
        })
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim() {
            "ascending" => Ok(Direction::Ascending),
            "descending" => Ok(Direction::Descending),
            "both" => Ok(Direction::Both),
            other => Err(format!(
                "unknown direction `{other}` (expected ascending, descending or both)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SectionMode {
    Slab,
    Crossing(Direction),
}

/// An axis-aligned hyperplane section.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SectionSpec {
    pub drop_axis: Axis,
    pub offset: f64,
    /// Full slab width; `f64::INFINITY` keeps every point.
    pub thickness: f64,
    pub mode: SectionMode,
}

impl SectionSpec {
    pub fn slab(drop_axis: Axis, offset: f64, thickness: f64) -> Self {
        SectionSpec {
            drop_axis,
            offset,
            thickness,
            mode: SectionMode::Slab,
        }
    }

    pub fn crossing(drop_axis: Axis, offset: f64, direction: Direction) -> Self {
        SectionSpec {
            drop_axis,
            offset,
            thickness: f64::INFINITY,
            mode: SectionMode::Crossing(direction),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.offset.is_finite() {
            return Err(Error::InvalidInput(format!(
                "section offset must be finite, got {}",
                self.offset
            )));
        }
        if self.thickness.is_nan() || self.thickness <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "section thickness must be > 0 or infinite, got {}",
                self.thickness
            )));
        }
        Ok(())
    }

    /// Re-inserts the fixed coordinate into a section point.
    pub fn lift(&self, p: &[f64]) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (axis, v) in self.drop_axis.remaining().iter().zip(p) {
            out[axis.index()] = *v;
        }
        out[self.drop_axis.index()] = self.offset;
        out
    }

    fn contains(&self, a: f64) -> bool {
        (a - self.offset).abs() <= self.thickness / 2.0
    }
}

fn check_orbit(orbit: &Orbit) -> Result<()> {
    if orbit.dim() != 4 {
        return Err(Error::InvalidInput(format!(
            "sections need a 4-dimensional orbit, got {} dimensions",
            orbit.dim()
        )));
    }
    if let Some(d) = orbit.divergence {
        return Err(Error::InvalidInput(format!(
            "cannot section a divergent orbit (escaped at step {})",
            d.step
        )));
    }
    Ok(())
}

fn section_cloud(spec: &SectionSpec, coords: Vec<f64>) -> PointCloud {
    let labels = spec
        .drop_axis
        .remaining()
        .iter()
        .map(|a| a.label().to_string())
        .collect();
    let mut provenance = Provenance {
        source: format!("section {}", spec.drop_axis),
        section: Some(*spec),
    };
    if coords.is_empty() {
        provenance.source.push_str(" (empty)");
    }
    PointCloud::from_parts_unchecked(3, labels, coords, provenance)
}

fn push_remaining(out: &mut Vec<f64>, p: &[f64], drop: usize) {
    out.extend(
        p.iter()
            .enumerate()
            .filter(|(k, _)| *k != drop)
            .map(|(_, v)| *v),
    );
}

/// Keeps orbit points with `|coord - offset| <= thickness / 2`, in orbit
/// order, duplicates included. An empty result is returned as an empty
/// cloud.
pub fn slab_section(orbit: &Orbit, spec: &SectionSpec) -> Result<PointCloud> {
    check_orbit(orbit)?;
    spec.validate()?;
    let drop = spec.drop_axis.index();
    let mut coords = Vec::new();
    for p in orbit.points() {
        if spec.contains(p[drop]) {
            push_remaining(&mut coords, p, drop);
        }
    }
    Ok(section_cloud(spec, coords))
}

/// Linear-interpolation crossings of the hyperplane between consecutive
/// iterates.
///
/// A pair `(a_n, a_{n+1})` crosses ascending when `a_n < c <= a_{n+1}` and
/// descending when `a_n > c >= a_{n+1}`, so an iterate lying exactly on the
/// plane is reported once. A pair with `a_n == a_{n+1} == c` emits `s_n`.
pub fn crossing_section(orbit: &Orbit, spec: &SectionSpec) -> Result<PointCloud> {
    check_orbit(orbit)?;
    spec.validate()?;
    let direction = match spec.mode {
        SectionMode::Crossing(d) => d,
        SectionMode::Slab => {
            return Err(Error::InvalidInput(
                "crossing_section needs a crossing-mode spec".into(),
            ))
        }
    };
    let drop = spec.drop_axis.index();
    let c = spec.offset;
    let mut coords = Vec::new();
    let pts: Vec<&[f64]> = orbit.points().collect();
    for pair in pts.windows(2) {
        let (s0, s1) = (pair[0], pair[1]);
        let (a0, a1) = (s0[drop], s1[drop]);
        if a0 == c && a1 == c {
            push_remaining(&mut coords, s0, drop);
            continue;
        }
        let up = a0 < c && c <= a1;
        let down = a0 > c && c >= a1;
        let wanted = match direction {
            Direction::Ascending => up,
            Direction::Descending => down,
            Direction::Both => up || down,
        };
        if !wanted {
            continue;
        }
        let t = (c - a0) / (a1 - a0);
        for k in (0..4).filter(|k| *k != drop) {
            coords.push(s0[k] + t * (s1[k] - s0[k]));
        }
    }
    Ok(section_cloud(spec, coords))
}

/// Dispatches on the spec's mode.
pub fn section(orbit: &Orbit, spec: &SectionSpec) -> Result<PointCloud> {
    match spec.mode {
        SectionMode::Slab => slab_section(orbit, spec),
        SectionMode::Crossing(_) => crossing_section(orbit, spec),
    }
}

/// Full projection dropping one axis.
pub fn project(orbit: &Orbit, drop_axis: Axis) -> Result<PointCloud> {
    slab_section(orbit, &SectionSpec::slab(drop_axis, 0.0, f64::INFINITY))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OffsetScanReport {
    pub axis: Axis,
    pub thickness: f64,
    /// `(offset, captured points)` per candidate, ascending by offset.
    pub candidates: Vec<(f64, usize)>,
    pub recommended: f64,
    /// The axis coordinate is constant over the orbit.
    pub degenerate: bool,
}

impl OffsetScanReport {
    pub fn recommended_count(&self) -> usize {
        self.candidates
            .iter()
            .find(|(c, _)| *c == self.recommended)
            .map(|(_, n)| *n)
            .unwrap_or(0)
    }
}

fn axis_range(orbit: &Orbit, axis: Axis) -> Option<(f64, f64)> {
    let k = axis.index();
    orbit.points().fold(None, |acc, p| {
        let v = p[k];
        Some(match acc {
            None => (v, v),
            Some((lo, hi)) => (f64::min(lo, v), f64::max(hi, v)),
        })
    })
}

/// Thickness used when none is given: 1% of the axis range.
pub fn auto_thickness(orbit: &Orbit, axis: Axis) -> f64 {
    match axis_range(orbit, axis) {
        Some((lo, hi)) if hi > lo => (hi - lo) * AUTO_THICKNESS_FRACTION,
        _ => f64::INFINITY,
    }
}

/// Counts slab captures at `n_candidates` evenly spaced offsets across the
/// axis range and recommends the fullest one (ties go to the smaller
/// offset).
pub fn scan_offsets(
    orbit: &Orbit,
    axis: Axis,
    n_candidates: usize,
    thickness: Option<f64>,
) -> Result<OffsetScanReport> {
    check_orbit(orbit)?;
    if n_candidates < 2 {
        return Err(Error::InvalidInput(
            "offset scan needs at least 2 candidates".into(),
        ));
    }
    let eps = thickness.unwrap_or_else(|| auto_thickness(orbit, axis));
    let (lo, hi) = axis_range(orbit, axis)
        .ok_or_else(|| Error::InvalidInput("cannot scan an empty orbit".into()))?;
    let k = axis.index();
    if lo == hi {
        return Ok(OffsetScanReport {
            axis,
            thickness: eps,
            candidates: vec![(lo, orbit.len())],
            recommended: lo,
            degenerate: true,
        });
    }
    SectionSpec::slab(axis, lo, eps).validate()?;
    let step = (hi - lo) / (n_candidates - 1) as f64;
    let offsets: Vec<f64> = (0..n_candidates)
        .map(|i| {
            if i + 1 == n_candidates {
                hi
            } else {
                lo + step * i as f64
            }
        })
        .collect();
    let candidates: Vec<(f64, usize)> = offsets
        .par_iter()
        .map(|&c| {
            let spec = SectionSpec::slab(axis, c, eps);
            let n = orbit.points().filter(|p| spec.contains(p[k])).count();
            (c, n)
        })
        .collect();
    let mut best = candidates[0];
    for &cand in &candidates[1..] {
        if cand.1 > best.1 {
            best = cand;
        }
    }
    Ok(OffsetScanReport {
        axis,
        thickness: eps,
        candidates,
        recommended: best.0,
        degenerate: false,
    })
}

/// A section with automatically chosen thickness and offset.
#[derive(Debug, Clone, PartialEq)]
pub struct AutoSection {
    pub spec: SectionSpec,
    pub scan: OffsetScanReport,
    pub cloud: PointCloud,
}

/// Scans offsets, then cuts a slab at the recommended one. `offset` and
/// `thickness` override the automatic choices when given.
pub fn auto_section(
    orbit: &Orbit,
    axis: Axis,
    offset: Option<f64>,
    thickness: Option<f64>,
    mode: SectionMode,
    n_candidates: usize,
) -> Result<AutoSection> {
    let scan = scan_offsets(orbit, axis, n_candidates, thickness)?;
    let spec = SectionSpec {
        drop_axis: axis,
        offset: offset.unwrap_or(scan.recommended),
        thickness: scan.thickness,
        mode,
    };
    let cloud = section(orbit, &spec)?;
    Ok(AutoSection { spec, scan, cloud })
}

/// Sections along each requested axis, computed concurrently; output order
/// follows `axes`.
pub fn sections_along(
    orbit: &Orbit,
    axes: &[Axis],
    offset: Option<f64>,
    thickness: Option<f64>,
    mode: SectionMode,
    n_candidates: usize,
) -> Result<Vec<AutoSection>> {
    axes.par_iter()
        .map(|&a| auto_section(orbit, a, offset, thickness, mode, n_candidates))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{Model, ParamsFour};

    fn params() -> Model {
        Model::Four(ParamsFour {
            k_xy: 0.5,
            k_yx: 0.5,
            k_yz: 0.5,
            k_zy: 0.5,
            k_zw: 0.5,
            k_wz: 0.5,
            k_out: 0.5,
            p: 0.5,
            q: 0.5,
            r: 0.5,
            s: 0.5,
            x_in: 1.0,
        })
    }

    fn orbit_of(points: &[[f64; 4]]) -> Orbit {
        let data = points.iter().flatten().copied().collect();
        Orbit::from_parts(params(), vec![1.0; 4], 0, data, None)
    }

    fn rows(c: &PointCloud) -> Vec<Vec<f64>> {
        c.points().map(|p| p.to_vec()).collect()
    }

    #[test]
    fn infinite_slab_is_full_projection() {
        let o = orbit_of(&[[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]]);
        let c = slab_section(&o, &SectionSpec::slab(Axis::Y, 100.0, f64::INFINITY)).unwrap();
        assert_eq!(rows(&c), vec![vec![1.0, 3.0, 4.0], vec![5.0, 7.0, 8.0]]);
        assert_eq!(c.labels(), ["x", "z", "w"]);
    }

    #[test]
    fn slab_window_test() {
        let o = orbit_of(&[
            [1.0, 1.0, 1.0, 0.4],
            [2.0, 2.0, 2.0, 0.6],
            [3.0, 3.0, 3.0, 1.4],
        ]);
        let c = slab_section(&o, &SectionSpec::slab(Axis::W, 0.5, 0.3)).unwrap();
        assert_eq!(rows(&c), vec![vec![1.0, 1.0, 1.0], vec![2.0, 2.0, 2.0]]);
    }

    #[test]
    fn empty_slab_is_not_an_error() {
        let o = orbit_of(&[[1.0, 1.0, 1.0, 0.4]]);
        let c = slab_section(&o, &SectionSpec::slab(Axis::W, 5.0, 0.1)).unwrap();
        assert!(c.is_empty());
        assert!(c.provenance.source.contains("empty"));
    }

    #[test]
    fn alternating_orbit_crossings() {
        let pts: Vec<[f64; 4]> = (0..10)
            .map(|i| [2.0, 3.0, 4.0, if i % 2 == 0 { -1.0 } else { 1.0 }])
            .collect();
        let o = orbit_of(&pts);
        let both =
            crossing_section(&o, &SectionSpec::crossing(Axis::W, 0.0, Direction::Both)).unwrap();
        assert_eq!(both.len(), 9);
        assert!(both.points().all(|p| p == [2.0, 3.0, 4.0]));
        let up = crossing_section(
            &o,
            &SectionSpec::crossing(Axis::W, 0.0, Direction::Ascending),
        )
        .unwrap();
        assert_eq!(up.len(), 5);
        let down = crossing_section(
            &o,
            &SectionSpec::crossing(Axis::W, 0.0, Direction::Descending),
        )
        .unwrap();
        assert_eq!(down.len(), 4);
    }

    #[test]
    fn handcrafted_crossings() {
        // drop x, c = 1
        // (0,0,0,0)   -> (2,4,6,8):   t = 1/2   -> (2,3,4)
        // (2,4,6,8)   -> (-2,0,0,0):  t = 1/4   -> (3,4.5,6)
        // (-2,0,0,0)  -> (1,3,3,3):   t = 1      -> (3,3,3)
        // (1,3,3,3)   -> (5,1,1,1):   a_n == c, no crossing
        let o = orbit_of(&[
            [0.0, 0.0, 0.0, 0.0],
            [2.0, 4.0, 6.0, 8.0],
            [-2.0, 0.0, 0.0, 0.0],
            [1.0, 3.0, 3.0, 3.0],
            [5.0, 1.0, 1.0, 1.0],
        ]);
        let c =
            crossing_section(&o, &SectionSpec::crossing(Axis::X, 1.0, Direction::Both)).unwrap();
        assert_eq!(
            rows(&c),
            vec![
                vec![2.0, 3.0, 4.0],
                vec![3.0, 4.5, 6.0],
                vec![3.0, 3.0, 3.0]
            ]
        );
        let spec = SectionSpec::crossing(Axis::X, 1.0, Direction::Both);
        for p in c.points() {
            assert_eq!(spec.lift(p)[0], 1.0);
        }
    }

    #[test]
    fn degenerate_pair_on_plane_emits_once() {
        let o = orbit_of(&[[1.0, 2.0, 3.0, 0.0], [4.0, 5.0, 6.0, 0.0]]);
        let c =
            crossing_section(&o, &SectionSpec::crossing(Axis::W, 0.0, Direction::Both)).unwrap();
        assert_eq!(rows(&c), vec![vec![1.0, 2.0, 3.0]]);
    }

    #[test]
    fn project_equals_infinite_slab() {
        let pts: Vec<[f64; 4]> = (0..50)
            .map(|i| {
                let t = i as f64 * 0.37;
                [t.sin(), t.cos(), t, t * t]
            })
            .collect();
        let o = orbit_of(&pts);
        for a in Axis::ALL {
            let p = project(&o, a).unwrap();
            let s = slab_section(&o, &SectionSpec::slab(a, -3.0, f64::INFINITY)).unwrap();
            assert_eq!(p.as_flat(), s.as_flat());
            assert_eq!(p.len(), o.len());
        }
    }

    #[test]
    fn uniform_axis_gives_flat_scan() {
        let pts: Vec<[f64; 4]> = (0..1000).map(|i| [0.0, 0.0, 0.0, i as f64]).collect();
        let o = orbit_of(&pts);
        let rep = scan_offsets(&o, Axis::W, 10, Some(37.0)).unwrap();
        let interior: Vec<usize> = rep.candidates[1..9].iter().map(|c| c.1).collect();
        let (mn, mx) = (
            interior.iter().min().unwrap(),
            interior.iter().max().unwrap(),
        );
        assert!(mx - mn <= 1, "{interior:?}");
        assert!(rep.candidates.iter().any(|c| c.0 == rep.recommended));
    }

    #[test]
    fn concentrated_mass_wins_scan() {
        let mut pts: Vec<[f64; 4]> = (0..100).map(|i| [0.0, 0.0, 0.0, i as f64]).collect();
        pts.extend(std::iter::repeat_n([0.0, 0.0, 0.0, 99.0], 50));
        let o = orbit_of(&pts);
        let rep = scan_offsets(&o, Axis::W, 12, None).unwrap();
        assert_eq!(rep.recommended, 99.0);
        assert_eq!(rep.recommended_count(), 51);
    }

    #[test]
    fn scan_ties_go_to_smaller_offset() {
        let pts: Vec<[f64; 4]> = vec![[0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 0.0, 1.0]];
        let rep = scan_offsets(&orbit_of(&pts), Axis::W, 2, Some(0.5)).unwrap();
        assert_eq!(rep.candidates, vec![(0.0, 1), (1.0, 1)]);
        assert_eq!(rep.recommended, 0.0);
    }

    #[test]
    fn constant_axis_is_degenerate() {
        let pts: Vec<[f64; 4]> = (0..5).map(|i| [i as f64, 0.0, 0.0, 2.5]).collect();
        let rep = scan_offsets(&orbit_of(&pts), Axis::W, 8, None).unwrap();
        assert!(rep.degenerate);
        assert_eq!(rep.candidates, vec![(2.5, 5)]);
    }

    #[test]
    fn sectioning_leaves_orbit_unchanged() {
        let pts: Vec<[f64; 4]> = (0..200)
            .map(|i| {
                let t = i as f64 * 0.1;
                [t.sin(), t.cos(), (2.0 * t).sin(), (3.0 * t).cos()]
            })
            .collect();
        let o = orbit_of(&pts);
        let before = o.clone();
        let a = sections_along(&o, &Axis::ALL, None, None, SectionMode::Slab, 32).unwrap();
        let b = sections_along(&o, &Axis::ALL, None, None, SectionMode::Slab, 32).unwrap();
        assert_eq!(a, b);
        assert_eq!(o, before);
    }

    #[test]
    fn rejects_three_level_orbits_and_bad_specs() {
        let o3 = Orbit::from_parts(
            Model::Three(crate::dynamics::ParamsThree {
                k_xy: 0.5,
                k_yx: 0.5,
                k_yz: 0.5,
                k_zy: 0.5,
                k_out: 0.5,
                p: 0.5,
                q: 0.5,
                r: 0.5,
                x_in: 1.0,
            }),
            vec![1.0; 3],
            0,
            vec![1.0; 3],
            None,
        );
        assert!(project(&o3, Axis::X).is_err());
        let o = orbit_of(&[[0.0; 4]]);
        assert!(slab_section(&o, &SectionSpec::slab(Axis::X, 0.0, 0.0)).is_err());
        assert!(slab_section(&o, &SectionSpec::slab(Axis::X, f64::NAN, 1.0)).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn slab_is_monotone_in_thickness(
                ws in prop::collection::vec(-5.0f64..5.0, 1..200),
                c in -5.0f64..5.0,
                e1 in 0.01f64..4.0,
                extra in 0.0f64..4.0,
            ) {
                let pts: Vec<[f64; 4]> = ws.iter().enumerate()
                    .map(|(i, w)| [i as f64, 0.0, 0.0, *w]).collect();
                let o = orbit_of(&pts);
                let thin = slab_section(&o, &SectionSpec::slab(Axis::W, c, e1)).unwrap();
                let thick = slab_section(&o, &SectionSpec::slab(Axis::W, c, e1 + extra)).unwrap();
                // first coordinate is the orbit index, so order-preserving
                // subsequence means a subset of indices in order
                let a: Vec<f64> = thin.points().map(|p| p[0]).collect();
                let b: Vec<f64> = thick.points().map(|p| p[0]).collect();
                let mut it = b.iter();
                for x in &a {
                    prop_assert!(it.any(|y| y == x));
                }
            }
        }
    }
}
