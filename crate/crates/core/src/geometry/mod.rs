//! Constellation geometry.
//!
//! A [`Constellation`] is an ordered list of 2D or 3D points together with its
//! average power and minimum Euclidean distance (MED). The lattice builders in
//! [`lattice`] produce the 3D-HQAM family and the 2D-HQAM baseline;
//! [`neighbors`] counts nearest neighbours for the SEP expansion.

mod lattice;
mod neighbors;

pub use lattice::{
    basis_vectors, generate_grid, hqam_2d, hqam_3d, hqam_3d_with_basis, select_constellation,
    GridSpec, LatticeBasis, SUPPORTED_ORDERS,
};
pub use neighbors::{nn_histogram, NnHistogram, LATTICE_NN_TOL, PROJECTED_NN_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point in two or three real dimensions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point {
    coords: Vec<f64>,
}

impl Point {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if !(2..=3).contains(&coords.len()) {
            return Err(Error::invalid(format!(
                "points must have 2 or 3 coordinates, got {}",
                coords.len()
            )));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("point coordinates must be finite"));
        }
        Ok(Self { coords })
    }

    pub fn xy(x: f64, y: f64) -> Self {
        Self { coords: vec![x, y] }
    }

    pub fn xyz(x: f64, y: f64, z: f64) -> Self {
        Self {
            coords: vec![x, y, z],
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm_sq(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }

    pub fn scaled(&self, alpha: f64) -> Point {
        Point {
            coords: self.coords.iter().map(|c| c * alpha).collect(),
        }
    }

    pub(crate) fn shifted(&self, by: &[f64]) -> Point {
        Point {
            coords: self.coords.iter().zip(by).map(|(c, b)| c - b).collect(),
        }
    }
}

/// An ordered set of `M >= 2` distinct points of a common dimension.
///
/// `avg_power` and `med` are recomputed on every construction, so a value of
/// this type always describes the points it holds.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    points: Vec<Point>,
    avg_power: f64,
    med: f64,
}

impl Constellation {
    /// Builds a constellation, validating dimensions and distinctness.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::invalid(format!(
                "a constellation needs at least 2 points, got {}",
                points.len()
            )));
        }
        let dim = points[0].dim();
        if points.iter().any(|p| p.dim() != dim) {
            return Err(Error::invalid("all points must share one dimension"));
        }
        let med = med_of(&points)?;
        let avg_power = avg_power_of(&points);
        Ok(Self {
            points,
            avg_power,
            med,
        })
    }

    pub fn from_coords(rows: &[Vec<f64>]) -> Result<Self> {
        let points = rows
            .iter()
            .map(|r| Point::new(r.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(points)
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn order(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn avg_power(&self) -> f64 {
        self.avg_power
    }

    pub fn med(&self) -> f64 {
        self.med
    }

    /// MED measured after scaling to unit average power.
    pub fn unit_power_med(&self) -> f64 {
        self.med / self.avg_power.sqrt()
    }

    pub fn centroid(&self) -> Vec<f64> {
        centroid_of(&self.points)
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        if !(alpha.is_finite() && alpha > 0.0) {
            return Err(Error::invalid("scale factor must be positive and finite"));
        }
        let points: Vec<Point> = self.points.iter().map(|p| p.scaled(alpha)).collect();
        Ok(Self {
            avg_power: avg_power_of(&points),
            med: self.med * alpha,
            points,
        })
    }

    /// Row-major flattening of the coordinates, `dim` values per point.
    pub fn flat_coords(&self) -> Vec<f64> {
        self.points
            .iter()
            .flat_map(|p| p.coords().iter().copied())
            .collect()
    }
}

/// Scales a constellation to unit average power.
pub fn normalize_power(c: &Constellation) -> Result<Constellation> {
    if c.avg_power <= 0.0 {
        return Err(Error::degenerate("cannot normalize an all-zero constellation"));
    }
    c.scaled(1.0 / c.avg_power.sqrt())
}

/// Exact minimum pairwise Euclidean distance of a constellation.
pub fn med(c: &Constellation) -> f64 {
    c.med
}

/// Minimum pairwise distance by exhaustive scan over all `M(M-1)/2` pairs.
///
/// Fails with a degenerate-input error when two points coincide.
pub fn med_of(points: &[Point]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("MED needs at least two points"));
    }
    let mut best = f64::INFINITY;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = a.dist_sq(b);
            if d < best {
                best = d;
            }
        }
    }
    if best == 0.0 {
        return Err(Error::degenerate("constellation contains duplicate points"));
    }
    Ok(best.sqrt())
}

pub(crate) fn avg_power_of(points: &[Point]) -> f64 {
    points.iter().map(Point::norm_sq).sum::<f64>() / points.len() as f64
}

pub(crate) fn centroid_of(points: &[Point]) -> Vec<f64> {
    let dim = points[0].dim();
    let mut c = vec![0.0; dim];
    for p in points {
        for (acc, x) in c.iter_mut().zip(p.coords()) {
            *acc += x;
        }
    }
    let m = points.len() as f64;
    c.iter_mut().for_each(|x| *x /= m);
    c
}
