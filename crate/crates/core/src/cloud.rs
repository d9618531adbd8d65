use crate::dynamics::Orbit;
use crate::error::{Error, Result};
use crate::sections::SectionSpec;

/// Where a cloud came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Provenance {
    pub source: String,
    pub section: Option<SectionSpec>,
}

/// An ordered set of finite points in 3 or 4 dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    dim: usize,
    coords: Vec<f64>,
    labels: Vec<String>,
    pub provenance: Provenance,
}

impl PointCloud {
    pub fn new(dim: usize, labels: Vec<String>, coords: Vec<f64>) -> Result<Self> {
        if !(3..=4).contains(&dim) {
            return Err(Error::InvalidInput(format!(
                "point clouds are 3- or 4-dimensional, got {dim}"
            )));
        }
        if labels.len() != dim {
            return Err(Error::InvalidInput(format!(
                "{} axis labels for a {dim}-dimensional cloud",
                labels.len()
            )));
        }
        if !coords.len().is_multiple_of(dim) {
            return Err(Error::InvalidInput(format!(
                "{} coordinates do not split into {dim}-tuples",
                coords.len()
            )));
        }
        if let Some(i) = coords.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite coordinate in point {}",
                i / dim
            )));
        }
        Ok(PointCloud {
            dim,
            coords,
            labels,
            provenance: Provenance::default(),
        })
    }

    /// Builds a cloud from `points`, which must all have length `labels.len()`.
    pub fn from_points<P: AsRef<[f64]>>(labels: &[&str], points: &[P]) -> Result<Self> {
        let dim = labels.len();
        let mut coords = Vec::with_capacity(points.len() * dim);
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::InvalidInput(format!(
                    "point has {} coordinates, expected {dim}",
                    p.len()
                )));
            }
            coords.extend_from_slice(p);
        }
        PointCloud::new(dim, labels.iter().map(|s| s.to_string()).collect(), coords)
    }

    /// The full orbit as a cloud in its own phase space.
    pub fn from_orbit(orbit: &Orbit) -> Self {
        let labels = ["x", "y", "z", "w"][..orbit.dim()]
            .iter()
            .map(|s| s.to_string())
            .collect();
        PointCloud {
            dim: orbit.dim(),
            coords: orbit.as_flat().to_vec(),
            labels,
            provenance: Provenance {
                source: "orbit".into(),
                section: None,
            },
        }
    }

    pub(crate) fn from_parts_unchecked(
        dim: usize,
        labels: Vec<String>,
        coords: Vec<f64>,
        provenance: Provenance,
    ) -> Self {
        debug_assert_eq!(coords.len() % dim, 0);
        PointCloud {
            dim,
            coords,
            labels,
            provenance,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, f64> {
        self.coords.chunks_exact(self.dim)
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.coords
    }

    /// Per-axis `(min, max)`, or `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Vec<f64>, Vec<f64>)> {
        if self.is_empty() {
            return None;
        }
        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for p in self.points() {
            for k in 0..self.dim {
                lo[k] = lo[k].min(p[k]);
                hi[k] = hi[k].max(p[k]);
            }
        }
        Some((lo, hi))
    }

    /// Longest bounding-box edge.
    pub fn max_extent(&self) -> f64 {
        match self.bounds() {
            Some((lo, hi)) => lo.iter().zip(&hi).map(|(a, b)| b - a).fold(0.0, f64::max),
            None => 0.0,
        }
    }
}
