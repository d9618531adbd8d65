//! The three- and four-level filter maps.
//!
//! Each level holds a particle mass. Per step, level `i` passes
//! `k_ij * c_i * m_i^2` to its neighbour `j`, where `c_i` is the level's
//! distribution coefficient (`p`, `q`, `r`, `s` from the top level down).
//! The top level receives a constant input `x_in`; the bottom level drains
//! `k_out * c_last * m_last^2` out of the system.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Default absolute bound beyond which an orbit is declared divergent.
pub const DEFAULT_DIVERGENCE_BOUND: f64 = 1e12;

/// Default number of discarded transient iterations.
pub const DEFAULT_TRANSIENT: usize = 10_000;

/// Default number of candidates tried by [`Model::find_bounded_start`].
pub const DEFAULT_START_ATTEMPTS: usize = 256;

/// Relative half-width of the random perturbation of searched starts.
pub const START_JITTER: f64 = 0.05;

pub type StateThree = [f64; 3];
pub type StateFour = [f64; 4];

/// Coefficients of the three-level map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsThree {
    pub k_xy: f64,
    pub k_yx: f64,
    pub k_yz: f64,
    pub k_zy: f64,
    pub k_out: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub x_in: f64,
}

/// Coefficients of the four-level map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamsFour {
    pub k_xy: f64,
    pub k_yx: f64,
    pub k_yz: f64,
    pub k_zy: f64,
    pub k_zw: f64,
    pub k_wz: f64,
    pub k_out: f64,
    pub p: f64,
    pub q: f64,
    pub r: f64,
    pub s: f64,
    pub x_in: f64,
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !v.is_finite() || v <= 0.0 {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite and > 0, got {v}"),
        });
    }
    Ok(())
}

fn check_input(v: f64) -> Result<()> {
    if !v.is_finite() || v < 0.0 {
        return Err(Error::InvalidParameter {
            name: "x_in",
            reason: format!("must be finite and >= 0, got {v}"),
        });
    }
    Ok(())
}

impl ParamsThree {
    pub const NAMES: [&'static str; 9] = [
        "k_xy", "k_yx", "k_yz", "k_zy", "k_out", "p", "q", "r", "x_in",
    ];

    pub fn values(&self) -> [f64; 9] {
        [
            self.k_xy, self.k_yx, self.k_yz, self.k_zy, self.k_out, self.p, self.q, self.r,
            self.x_in,
        ]
    }

    pub fn from_values(v: [f64; 9]) -> Self {
        ParamsThree {
            k_xy: v[0],
            k_yx: v[1],
            k_yz: v[2],
            k_zy: v[3],
            k_out: v[4],
            p: v[5],
            q: v[6],
            r: v[7],
            x_in: v[8],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values();
        for (name, value) in Self::NAMES.iter().zip(v).take(8) {
            check_positive(name, value)?;
        }
        check_input(self.x_in)
    }

    /// Names of coefficients outside the nominal open interval (0, 1).
    pub fn outside_unit_interval(&self) -> Vec<&'static str> {
        outside_unit(&Self::NAMES[..8], &self.values()[..8])
    }
}

impl ParamsFour {
    pub const NAMES: [&'static str; 12] = [
        "k_xy", "k_yx", "k_yz", "k_zy", "k_zw", "k_wz", "k_out", "p", "q", "r", "s", "x_in",
    ];

    pub fn values(&self) -> [f64; 12] {
        [
            self.k_xy, self.k_yx, self.k_yz, self.k_zy, self.k_zw, self.k_wz, self.k_out, self.p,
            self.q, self.r, self.s, self.x_in,
        ]
    }

    pub fn from_values(v: [f64; 12]) -> Self {
        ParamsFour {
            k_xy: v[0],
            k_yx: v[1],
            k_yz: v[2],
            k_zy: v[3],
            k_zw: v[4],
            k_wz: v[5],
            k_out: v[6],
            p: v[7],
            q: v[8],
            r: v[9],
            s: v[10],
            x_in: v[11],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.values();
        for (name, value) in Self::NAMES.iter().zip(v).take(11) {
            check_positive(name, value)?;
        }
        check_input(self.x_in)
    }

    pub fn outside_unit_interval(&self) -> Vec<&'static str> {
        outside_unit(&Self::NAMES[..11], &self.values()[..11])
    }
}

fn outside_unit(names: &[&'static str], values: &[f64]) -> Vec<&'static str> {
    names
        .iter()
        .zip(values)
        .filter(|(_, v)| !(**v > 0.0 && **v < 1.0))
        .map(|(n, _)| *n)
        .collect()
}

/// A level-transfer map acting on `N`-component states.
pub trait LevelSystem<const N: usize>: Copy + Send + Sync {
    /// Exact image of `s` under the map, without any finiteness check.
    fn image(&self, s: &[f64; N]) -> [f64; N];

    /// Entry `(i, j)` is the derivative of next component `i` with respect
    /// to current component `j`.
    fn jacobian(&self, s: &[f64; N]) -> [[f64; N]; N];

    /// The positive stationary state.
    fn stationary(&self) -> Result<[f64; N]>;

    /// `sum(image(s)) - sum(s) - x_in + drain(s)`; zero up to rounding.
    fn mass_balance_residual(&self, s: &[f64; N]) -> f64;

    fn x_in(&self) -> f64;

    fn with_x_in(&self, x_in: f64) -> Self;

    fn model(&self) -> Model;
}

impl LevelSystem<3> for ParamsThree {
    fn image(&self, s: &StateThree) -> StateThree {
        let [x, y, z] = *s;
        let fx = self.k_xy * self.p * x * x;
        let qy = self.q * y * y;
        let rz = self.r * z * z;
        [
            x - fx + self.k_yx * qy + self.x_in,
            y + fx - (self.k_yx + self.k_yz) * qy + self.k_zy * rz,
            z + self.k_yz * qy - (self.k_zy + self.k_out) * rz,
        ]
    }

    fn jacobian(&self, s: &StateThree) -> [[f64; 3]; 3] {
        let [x, y, z] = *s;
        let dx = 2.0 * self.p * x;
        let dy = 2.0 * self.q * y;
        let dz = 2.0 * self.r * z;
        [
            [1.0 - self.k_xy * dx, self.k_yx * dy, 0.0],
            [
                self.k_xy * dx,
                1.0 - (self.k_yx + self.k_yz) * dy,
                self.k_zy * dz,
            ],
            [0.0, self.k_yz * dy, 1.0 - (self.k_zy + self.k_out) * dz],
        ]
    }

    fn stationary(&self) -> Result<StateThree> {
        fixed_point3(self).map(|fp| [fp.state[0], fp.state[1], fp.state[2]])
    }

    fn mass_balance_residual(&self, s: &StateThree) -> f64 {
        let next = self.image(s);
        let drain = self.k_out * self.r * s[2] * s[2];
        (next.iter().sum::<f64>() - s.iter().sum::<f64>()) - self.x_in + drain
    }

    fn x_in(&self) -> f64 {
        self.x_in
    }

    fn with_x_in(&self, x_in: f64) -> Self {
        ParamsThree { x_in, ..*self }
    }

    fn model(&self) -> Model {
        Model::Three(*self)
    }
}

impl LevelSystem<4> for ParamsFour {
    fn image(&self, st: &StateFour) -> StateFour {
        let [x, y, z, w] = *st;
        let fx = self.k_xy * self.p * x * x;
        let qy = self.q * y * y;
        let rz = self.r * z * z;
        let sw = self.s * w * w;
        [
            x - fx + self.k_yx * qy + self.x_in,
            y + fx - (self.k_yx + self.k_yz) * qy + self.k_zy * rz,
            z + self.k_yz * qy - (self.k_zy + self.k_zw) * rz + self.k_wz * sw,
            w + self.k_zw * rz - (self.k_wz + self.k_out) * sw,
        ]
    }

    fn jacobian(&self, st: &StateFour) -> [[f64; 4]; 4] {
        let [x, y, z, w] = *st;
        let dx = 2.0 * self.p * x;
        let dy = 2.0 * self.q * y;
        let dz = 2.0 * self.r * z;
        let dw = 2.0 * self.s * w;
        [
            [1.0 - self.k_xy * dx, self.k_yx * dy, 0.0, 0.0],
            [
                self.k_xy * dx,
                1.0 - (self.k_yx + self.k_yz) * dy,
                self.k_zy * dz,
                0.0,
            ],
            [
                0.0,
                self.k_yz * dy,
                1.0 - (self.k_zy + self.k_zw) * dz,
                self.k_wz * dw,
            ],
            [
                0.0,
                0.0,
                self.k_zw * dz,
                1.0 - (self.k_wz + self.k_out) * dw,
            ],
        ]
    }

    fn stationary(&self) -> Result<StateFour> {
        fixed_point4(self).map(|fp| [fp.state[0], fp.state[1], fp.state[2], fp.state[3]])
    }

    fn mass_balance_residual(&self, st: &StateFour) -> f64 {
        let next = self.image(st);
        let drain = self.k_out * self.s * st[3] * st[3];
        (next.iter().sum::<f64>() - st.iter().sum::<f64>()) - self.x_in + drain
    }

    fn x_in(&self) -> f64 {
        self.x_in
    }

    fn with_x_in(&self, x_in: f64) -> Self {
        ParamsFour { x_in, ..*self }
    }

    fn model(&self) -> Model {
        Model::Four(*self)
    }
}

fn first_non_finite(s: &[f64], bound: f64) -> Option<usize> {
    s.iter().position(|v| !v.is_finite() || v.abs() > bound)
}

/// One step with divergence detection.
pub fn checked_step<const N: usize, S: LevelSystem<N>>(
    sys: &S,
    s: &[f64; N],
    step: u64,
) -> Result<[f64; N]> {
    let next = sys.image(s);
    if let Some(component) = first_non_finite(&next, f64::MAX) {
        return Err(Error::Divergence {
            step,
            component,
            value: next[component],
        });
    }
    Ok(next)
}

pub fn step3(s: &StateThree, p: &ParamsThree) -> Result<StateThree> {
    checked_step(p, s, 1)
}

pub fn step4(s: &StateFour, p: &ParamsFour) -> Result<StateFour> {
    checked_step(p, s, 1)
}

/// A stationary state and its one-step displacement.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPoint {
    pub state: Vec<f64>,
    /// Max absolute component of `step(state) - state`.
    pub residual: f64,
}

fn nonzero(name: &'static str, v: f64) -> Result<f64> {
    if v == 0.0 || !v.is_finite() {
        return Err(Error::Domain(format!(
            "coefficient `{name}` appears in a denominator and must be nonzero"
        )));
    }
    Ok(v)
}

fn residual_of<const N: usize, S: LevelSystem<N>>(sys: &S, s: &[f64; N]) -> f64 {
    sys.image(s)
        .iter()
        .zip(s)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

pub fn fixed_point3(p: &ParamsThree) -> Result<FixedPoint> {
    let k_xy = nonzero("k_xy", p.k_xy)?;
    let k_yz = nonzero("k_yz", p.k_yz)?;
    let k_out = nonzero("k_out", p.k_out)?;
    let pp = nonzero("p", p.p)?;
    let q = nonzero("q", p.q)?;
    let r = nonzero("r", p.r)?;
    if p.x_in < 0.0 {
        return Err(Error::Domain("x_in must be >= 0".into()));
    }
    let below_z = 1.0 + p.k_zy / k_out;
    let x = (p.x_in / (k_xy * pp) * (1.0 + p.k_yx / k_yz * below_z)).sqrt();
    let y = (p.x_in / (k_yz * q) * below_z).sqrt();
    let z = (p.x_in / (k_out * r)).sqrt();
    let state = [x, y, z];
    Ok(FixedPoint {
        residual: residual_of(p, &state),
        state: state.to_vec(),
    })
}

/// Stationary state of the four-level map.
///
/// In steady state every inter-level net flux equals `x_in`, so the levels
/// can be solved from the bottom up:
/// `k_out s w^2 = x_in`, `k_zw r z^2 - k_wz s w^2 = x_in`, and so on.
pub fn fixed_point4(p: &ParamsFour) -> Result<FixedPoint> {
    let k_xy = nonzero("k_xy", p.k_xy)?;
    let k_yz = nonzero("k_yz", p.k_yz)?;
    let k_zw = nonzero("k_zw", p.k_zw)?;
    let k_out = nonzero("k_out", p.k_out)?;
    let pp = nonzero("p", p.p)?;
    let q = nonzero("q", p.q)?;
    let r = nonzero("r", p.r)?;
    let s = nonzero("s", p.s)?;
    if p.x_in < 0.0 {
        return Err(Error::Domain("x_in must be >= 0".into()));
    }
    let below_w = 1.0 + p.k_wz / k_out;
    let below_z = 1.0 + p.k_zy / k_zw * below_w;
    let below_y = 1.0 + p.k_yx / k_yz * below_z;
    let w = (p.x_in / (k_out * s)).sqrt();
    let z = (p.x_in / (k_zw * r) * below_w).sqrt();
    let y = (p.x_in / (k_yz * q) * below_z).sqrt();
    let x = (p.x_in / (k_xy * pp) * below_y).sqrt();
    let state = [x, y, z, w];
    Ok(FixedPoint {
        residual: residual_of(p, &state),
        state: state.to_vec(),
    })
}

/// Either of the two systems, for callers that pick the level count at
/// runtime.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    Three(ParamsThree),
    Four(ParamsFour),
}

impl Model {
    pub fn dim(&self) -> usize {
        match self {
            Model::Three(_) => 3,
            Model::Four(_) => 4,
        }
    }

    pub fn x_in(&self) -> f64 {
        match self {
            Model::Three(p) => p.x_in,
            Model::Four(p) => p.x_in,
        }
    }

    pub fn with_x_in(&self, x_in: f64) -> Model {
        match self {
            Model::Three(p) => Model::Three(p.with_x_in(x_in)),
            Model::Four(p) => Model::Four(p.with_x_in(x_in)),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Model::Three(p) => p.validate(),
            Model::Four(p) => p.validate(),
        }
    }

    pub fn names(&self) -> &'static [&'static str] {
        match self {
            Model::Three(_) => &ParamsThree::NAMES,
            Model::Four(_) => &ParamsFour::NAMES,
        }
    }

    pub fn values(&self) -> Vec<f64> {
        match self {
            Model::Three(p) => p.values().to_vec(),
            Model::Four(p) => p.values().to_vec(),
        }
    }

    pub fn outside_unit_interval(&self) -> Vec<&'static str> {
        match self {
            Model::Three(p) => p.outside_unit_interval(),
            Model::Four(p) => p.outside_unit_interval(),
        }
    }

    pub fn fixed_point(&self) -> Result<FixedPoint> {
        match self {
            Model::Three(p) => fixed_point3(p),
            Model::Four(p) => fixed_point4(p),
        }
    }

    pub fn step(&self, s: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(s)?;
        Ok(match self {
            Model::Three(p) => step3(&to_array(s), p)?.to_vec(),
            Model::Four(p) => step4(&to_array(s), p)?.to_vec(),
        })
    }

    /// Row-major Jacobian.
    pub fn jacobian(&self, s: &[f64]) -> Result<Vec<Vec<f64>>> {
        self.check_dim(s)?;
        Ok(match self {
            Model::Three(p) => p
                .jacobian(&to_array(s))
                .iter()
                .map(|r| r.to_vec())
                .collect(),
            Model::Four(p) => p
                .jacobian(&to_array(s))
                .iter()
                .map(|r| r.to_vec())
                .collect(),
        })
    }

    pub fn mass_balance_residual(&self, s: &[f64]) -> Result<f64> {
        self.check_dim(s)?;
        Ok(match self {
            Model::Three(p) => p.mass_balance_residual(&to_array(s)),
            Model::Four(p) => p.mass_balance_residual(&to_array(s)),
        })
    }

    pub fn iterate(&self, s0: &[f64], opts: &IterateOptions) -> Result<Orbit> {
        self.check_dim(s0)?;
        match self {
            Model::Three(p) => iterate(p, to_array(s0), opts),
            Model::Four(p) => iterate(p, to_array(s0), opts),
        }
    }

    /// Builds a model from its coefficient values in [`Model::names`] order.
    pub fn from_values(values: &[f64]) -> Result<Model> {
        match values.len() {
            9 => Ok(Model::Three(ParamsThree::from_values(to_array(values)))),
            12 => Ok(Model::Four(ParamsFour::from_values(to_array(values)))),
            n => Err(Error::InvalidInput(format!(
                "{n} coefficients match neither the 3-level (9) nor the 4-level (12) system"
            ))),
        }
    }

    /// Looks for an initial state whose orbit stays bounded for the whole
    /// budget. The all-ones state is tried first, then seeded random
    /// perturbations of up to [`START_JITTER`] around the fixed point.
    pub fn find_bounded_start(
        &self,
        opts: &IterateOptions,
        seed: u64,
        attempts: usize,
    ) -> Result<BoundedStart> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centre = self.fixed_point().ok().map(|fp| fp.state);
        for attempt in 0..attempts {
            let start = match (attempt, &centre) {
                (0, _) | (_, None) => vec![1.0; self.dim()],
                (_, Some(c)) => c
                    .iter()
                    .map(|v| v * (1.0 + rng.gen_range(-START_JITTER..START_JITTER)))
                    .collect(),
            };
            match self.iterate(&start, opts) {
                Ok(orbit) if !orbit.is_divergent() => {
                    return Ok(BoundedStart {
                        state: start,
                        attempt,
                        orbit,
                    })
                }
                Ok(_) | Err(Error::EmptyOrbit { .. }) => {}
                Err(e) => return Err(e),
            }
            if centre.is_none() {
                break;
            }
        }
        Err(Error::Domain(format!(
            "no bounded orbit of {} iterations found from {attempts} start candidates",
            opts.n_transient + opts.n_keep
        )))
    }

    fn check_dim(&self, s: &[f64]) -> Result<()> {
        if s.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "state has {} components, system has {} levels",
                s.len(),
                self.dim()
            )));
        }
        if let Some(i) = s.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "state component {i} is not finite"
            )));
        }
        Ok(())
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .names()
            .iter()
            .zip(self.values())
            .map(|(n, v)| format!("{n}={v}"))
            .collect();
        write!(f, "{}-level [{}]", self.dim(), parts.join(", "))
    }
}

pub(crate) fn to_array<const N: usize>(s: &[f64]) -> [f64; N] {
    let mut a = [0.0; N];
    a.copy_from_slice(s);
    a
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterateOptions {
    pub n_transient: usize,
    pub n_keep: usize,
    pub bound: f64,
}

impl IterateOptions {
    pub fn new(n_transient: usize, n_keep: usize) -> Self {
        IterateOptions {
            n_transient,
            n_keep,
            bound: DEFAULT_DIVERGENCE_BOUND,
        }
    }
}

/// Result of [`Model::find_bounded_start`].
#[derive(Debug, Clone, PartialEq)]
pub struct BoundedStart {
    pub state: Vec<f64>,
    /// Zero-based index of the successful candidate.
    pub attempt: usize,
    pub orbit: Orbit,
}

/// Where and how an orbit escaped.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    /// 1-based iteration index of the first escaped image.
    pub step: u64,
    pub component: usize,
    pub value: f64,
}

/// Retained post-transient states of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Orbit {
    pub params: Model,
    pub initial: Vec<f64>,
    pub n_transient: usize,
    data: Vec<f64>,
    pub divergence: Option<Divergence>,
}

impl Orbit {
    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_divergent(&self) -> bool {
        self.divergence.is_some()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.data[i * d..(i + 1) * d]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim())
    }

    /// Flat row-major storage.
    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn last(&self) -> Option<&[f64]> {
        if self.is_empty() {
            None
        } else {
            Some(self.point(self.len() - 1))
        }
    }

    /// Componentwise time average of the retained points.
    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let mut m = vec![0.0; d];
        for pt in self.points() {
            for (acc, v) in m.iter_mut().zip(pt) {
                *acc += v;
            }
        }
        let n = self.len().max(1) as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }

    pub(crate) fn from_parts(
        params: Model,
        initial: Vec<f64>,
        n_transient: usize,
        data: Vec<f64>,
        divergence: Option<Divergence>,
    ) -> Self {
        Orbit {
            params,
            initial,
            n_transient,
            data,
            divergence,
        }
    }
}

/// Discards `n_transient` images of `s0` and retains the next `n_keep`.
///
/// Stops early, setting the divergence flag, as soon as a component leaves
/// `[-bound, bound]` or stops being finite; retained points then end at the
/// last bounded state. Divergence before the first retained point is an
/// error.
pub fn iterate<const N: usize, S: LevelSystem<N>>(
    sys: &S,
    s0: [f64; N],
    opts: &IterateOptions,
) -> Result<Orbit> {
    if opts.n_keep == 0 {
        return Err(Error::InvalidInput("n_keep must be at least 1".into()));
    }
    let mut s = s0;
    let mut data = Vec::with_capacity(opts.n_keep * N);
    let total = opts.n_transient + opts.n_keep;
    let mut divergence = None;
    for n in 0..total {
        let next = sys.image(&s);
        if let Some(component) = first_non_finite(&next, opts.bound) {
            let step = n as u64 + 1;
            if n < opts.n_transient || data.is_empty() {
                return Err(Error::EmptyOrbit { step });
            }
            divergence = Some(Divergence {
                step,
                component,
                value: next[component],
            });
            break;
        }
        s = next;
        if n >= opts.n_transient {
            data.extend_from_slice(&s);
        }
    }
    Ok(Orbit::from_parts(
        sys.model(),
        s0.to_vec(),
        opts.n_transient,
        data,
        divergence,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fig1() -> ParamsThree {
        ParamsThree {
            k_xy: 0.5,
            k_yx: 0.4,
            k_yz: 0.3,
            k_zy: 0.3,
            k_out: 0.4,
            p: 0.008,
            q: 0.005,
            r: 0.0057,
            x_in: 39.65,
        }
    }

    fn fig2() -> ParamsThree {
        ParamsThree {
            k_xy: 0.5,
            k_yx: 0.1,
            k_yz: 0.1,
            k_zy: 0.4,
            k_out: 0.5,
            p: 0.05,
            q: 0.02,
            r: 0.01,
            x_in: 30.0,
        }
    }

    fn fig4() -> ParamsFour {
        ParamsFour {
            k_xy: 0.65,
            k_yx: 0.25,
            k_yz: 0.65,
            k_zy: 0.25,
            k_zw: 0.000001,
            k_wz: 0.1,
            k_out: 0.4,
            p: 1.0,
            q: 1.0,
            r: 1.0,
            s: 0.1,
            x_in: 0.435,
        }
    }

    fn fig7() -> ParamsFour {
        ParamsFour {
            k_xy: 0.1,
            k_yx: 0.1,
            k_yz: 0.1,
            k_zy: 0.1,
            k_zw: 0.00001,
            k_wz: 0.1,
            k_out: 0.2,
            p: 1.0,
            q: 1.0,
            r: 1.0,
            s: 0.1,
            x_in: 1.536,
        }
    }

    fn assert_rel(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!(
                (x - y).abs() <= tol * y.abs().max(1.0),
                "{a:?} vs {b:?} (tol {tol})"
            );
        }
    }

    #[test]
    fn zero_state_maps_to_input() {
        let p = ParamsThree {
            x_in: 5.0,
            ..fig1()
        };
        assert_eq!(step3(&[0.0; 3], &p).unwrap(), [5.0, 0.0, 0.0]);
        let p4 = fig7();
        assert_eq!(step4(&[0.0; 4], &p4).unwrap(), [1.536, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn single_step_matches_hand_arithmetic() {
        // x = 1 - 0.5*0.008 + 0.4*0.005 + 39.65
        // y = 1 + 0.004 - 0.7*0.005 + 0.3*0.0057
        // z = 1 + 0.3*0.005 - 0.7*0.0057
        let got = step3(&[1.0; 3], &fig1()).unwrap();
        assert_rel(&got, &[40.648, 1.00221, 0.99751], 1e-14);

        // x = 1 - 0.65 + 0.25 + 0.435
        // y = 1 + 0.65 - 0.9 + 0.25
        // z = 1 + 0.65 - 0.250001 + 0.1*0.1
        // w = 1 + 1e-6 - 0.5*0.1
        let got = step4(&[1.0; 4], &fig4()).unwrap();
        assert_rel(&got, &[1.035, 1.0, 1.409999, 0.950001], 1e-14);
    }

    #[test]
    fn overflow_reports_component() {
        let err = step3(&[1e200, 1.0, 1.0], &fig1()).unwrap_err();
        match err {
            Error::Divergence { component, .. } => assert_eq!(component, 0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fixed_point3_matches_formula_values() {
        // Direct evaluation of the stationary formulas for the fig. 2 set:
        // x = sqrt(30/0.025 * (1 + 1*(1 + 0.8))) = sqrt(3360)
        // y = sqrt(30/0.002 * 1.8) = sqrt(27000)
        // z = sqrt(30/0.005) = sqrt(6000)
        let fp = fixed_point3(&fig2()).unwrap();
        assert_rel(
            &fp.state,
            &[3360f64.sqrt(), 27000f64.sqrt(), 6000f64.sqrt()],
            1e-14,
        );
        let next = step3(&to_array(&fp.state), &fig2()).unwrap();
        assert_rel(&next, &fp.state, 1e-9);
        assert!(fp.residual <= 1e-9 * 164.0);
    }

    #[test]
    fn fixed_point_zero_input_is_origin() {
        let p = ParamsThree {
            x_in: 0.0,
            ..fig1()
        };
        assert_eq!(fixed_point3(&p).unwrap().state, vec![0.0; 3]);
        let p = ParamsFour {
            x_in: 0.0,
            ..fig7()
        };
        assert_eq!(fixed_point4(&p).unwrap().state, vec![0.0; 4]);
    }

    #[test]
    fn fixed_point_scales_with_sqrt_of_input() {
        let a = fixed_point3(&fig2()).unwrap().state;
        let b = fixed_point3(&ParamsThree {
            x_in: 120.0,
            ..fig2()
        })
        .unwrap()
        .state;
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn fixed_point4_residual_and_bottom_level() {
        let p = fig7();
        let fp = fixed_point4(&p).unwrap();
        let next = step4(&to_array(&fp.state), &p).unwrap();
        assert_rel(&next, &fp.state, 1e-9);
        // bottom level depends only on x_in, k_out, s
        let other = ParamsFour {
            k_xy: 0.9,
            k_zw: 0.3,
            p: 0.2,
            ..p
        };
        assert_eq!(fixed_point4(&other).unwrap().state[3], fp.state[3]);
        assert_eq!(fp.state[3], (1.536f64 / 0.02).sqrt());
    }

    #[test]
    fn zero_denominator_is_domain_error() {
        let p = ParamsThree {
            k_out: 0.0,
            ..fig1()
        };
        assert!(matches!(fixed_point3(&p), Err(Error::Domain(_))));
        let p = ParamsFour {
            k_zw: 0.0,
            ..fig7()
        };
        assert!(matches!(fixed_point4(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn jacobian_at_origin_is_identity() {
        let j = fig7().jacobian(&[0.0; 4]);
        for (i, row) in j.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                assert_eq!(*v, if i == k { 1.0 } else { 0.0 });
            }
        }
        let j = fig1().jacobian(&[0.0; 3]);
        assert_eq!(j, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn mass_balance_exact_at_origin() {
        assert_eq!(fig4().mass_balance_residual(&[0.0; 4]), 0.0);
        assert_eq!(fig1().mass_balance_residual(&[0.0; 3]), 0.0);
    }

    #[test]
    fn iterate_from_fixed_point_stays_put() {
        let p = ParamsThree {
            x_in: 5.0,
            ..fig1()
        };
        let fp = fixed_point3(&p).unwrap();
        let orbit = iterate(&p, to_array(&fp.state), &IterateOptions::new(100, 1000)).unwrap();
        assert_eq!(orbit.len(), 1000);
        for pt in orbit.points() {
            assert_rel(pt, &fp.state, 1e-9);
        }
    }

    #[test]
    fn single_kept_point_is_one_step() {
        let p = fig1();
        let orbit = iterate(&p, [1.0; 3], &IterateOptions::new(0, 1)).unwrap();
        assert_eq!(orbit.len(), 1);
        assert_eq!(orbit.point(0), step3(&[1.0; 3], &p).unwrap());
    }

    #[test]
    fn early_divergence_is_an_error() {
        let err = iterate(&fig4(), [1.0; 4], &IterateOptions::new(10_000, 100)).unwrap_err();
        assert!(matches!(err, Error::EmptyOrbit { .. }));
    }

    #[test]
    fn late_divergence_truncates_orbit() {
        let p = fig4();
        let err = iterate(&p, [1.0; 4], &IterateOptions::new(0, 10_000)).unwrap();
        let div = err.divergence.expect("fig4 set escapes");
        assert_eq!(err.len() as u64, div.step - 1);
        assert!(err.points().all(|pt| pt.iter().all(|v| v.abs() <= 1e12)));
    }

    #[test]
    fn iterate_is_bitwise_reproducible() {
        let p = fig2();
        let p = ParamsThree { x_in: 17.0, ..p };
        let a = iterate(&p, [1.0; 3], &IterateOptions::new(1000, 5000)).unwrap();
        let b = iterate(&p, [1.0; 3], &IterateOptions::new(1000, 5000)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn strict_mode_flags_coefficients_outside_unit_interval() {
        assert_eq!(fig4().outside_unit_interval(), vec!["p", "q", "r"]);
        assert!(fig1().outside_unit_interval().is_empty());
    }

    #[test]
    fn validation_rejects_nonpositive_coefficients() {
        assert!(ParamsThree { q: 0.0, ..fig1() }.validate().is_err());
        assert!(ParamsThree {
            x_in: -1.0,
            ..fig1()
        }
        .validate()
        .is_err());
        assert!(ParamsThree {
            x_in: 0.0,
            ..fig1()
        }
        .validate()
        .is_ok());
        assert!(ParamsFour {
            s: f64::NAN,
            ..fig7()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn bounded_start_prefers_ones() {
        let m = Model::Three(fig1());
        let found = m
            .find_bounded_start(&IterateOptions::new(0, 1000), 0, 4)
            .unwrap();
        assert_eq!(found.attempt, 0);
        assert_eq!(found.state, vec![1.0; 3]);
        assert_eq!(found.orbit.len(), 1000);
    }

    #[test]
    fn bounded_start_search_is_seeded() {
        let m = Model::Three(fig1());
        let opts = IterateOptions::new(10_000, 100_000);
        let a = m
            .find_bounded_start(&opts, 3, DEFAULT_START_ATTEMPTS)
            .unwrap();
        let b = m
            .find_bounded_start(&opts, 3, DEFAULT_START_ATTEMPTS)
            .unwrap();
        assert_eq!(a, b);
        assert!(!a.orbit.is_divergent());
        let fp = m.fixed_point().unwrap().state;
        if a.attempt > 0 {
            for (s, c) in a.state.iter().zip(&fp) {
                assert!((s / c - 1.0).abs() <= START_JITTER);
            }
        }
    }

    #[test]
    fn unbounded_system_exhausts_the_search() {
        let m = Model::Four(fig4());
        let err = m.find_bounded_start(&IterateOptions::new(100, 100), 0, 8);
        assert!(matches!(err, Err(Error::Domain(_))));
    }

    #[test]
    fn model_from_values_round_trip() {
        let m = Model::Four(fig4());
        assert_eq!(Model::from_values(&m.values()).unwrap(), m);
        assert!(Model::from_values(&[1.0; 5]).is_err());
    }
}
