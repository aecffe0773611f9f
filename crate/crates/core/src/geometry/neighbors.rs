use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use super::Constellation;
use crate::error::{Error, Result};

/// Neighbour tolerance for constellations taken straight from a lattice.
pub const LATTICE_NN_TOL: f64 = 1e-6;
/// Neighbour tolerance for PSO-projected constellations.
pub const PROJECTED_NN_TOL: f64 = 1e-3;

/// Per-point nearest-neighbour counts `K(i)` and their exact mean.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NnHistogram {
    pub per_point: Vec<u32>,
    #[serde(serialize_with = "crate::io::ser_rational")]
    pub mean_k: BigRational,
    pub tolerance: f64,
}

impl NnHistogram {
    /// Builds a histogram from `(K, multiplicity)` pairs, e.g. `[(6, 4), (5, 3)]`.
    pub fn from_multiplicities(pairs: &[(u32, usize)]) -> Result<Self> {
        let per_point: Vec<u32> = pairs
            .iter()
            .flat_map(|&(k, n)| std::iter::repeat_n(k, n))
            .collect();
        Self::from_counts(per_point, 0.0)
    }

    pub(crate) fn from_counts(per_point: Vec<u32>, tolerance: f64) -> Result<Self> {
        if per_point.is_empty() {
            return Err(Error::invalid("histogram must cover at least one point"));
        }
        let total: u64 = per_point.iter().map(|&k| k as u64).sum();
        let mean_k = BigRational::new(BigInt::from(total), BigInt::from(per_point.len()));
        Ok(Self {
            per_point,
            mean_k,
            tolerance,
        })
    }

    pub fn order(&self) -> usize {
        self.per_point.len()
    }

    pub fn max_k(&self) -> u32 {
        self.per_point.iter().copied().max().unwrap_or(0)
    }

    pub fn mean_k_f64(&self) -> f64 {
        use num_traits::ToPrimitive;
        self.mean_k.to_f64().unwrap_or(f64::NAN)
    }

    /// `(K, count)` pairs sorted by descending `K`.
    pub fn multiplicities(&self) -> Vec<(u32, usize)> {
        let mut out: Vec<(u32, usize)> = Vec::new();
        let mut ks = self.per_point.clone();
        ks.sort_unstable_by(|a, b| b.cmp(a));
        for k in ks {
            match out.last_mut() {
                Some((last, n)) if *last == k => *n += 1,
                _ => out.push((k, 1)),
            }
        }
        out
    }
}

/// Counts, for every point, the others within `(1 + rel_tol) * med(c)`.
///
/// Points of a lattice constellation always have at least one neighbour at the
/// MED. A projected constellation may have isolated points with `K(i) = 0`.
pub fn nn_histogram(c: &Constellation, rel_tol: f64) -> Result<NnHistogram> {
    if !(0.0..0.5).contains(&rel_tol) {
        return Err(Error::invalid(format!(
            "neighbour tolerance must lie in [0, 0.5), got {rel_tol}"
        )));
    }
    let r = (1.0 + rel_tol) * c.med();
    let r2 = r * r;
    let pts = c.points();
    let mut counts = vec![0u32; pts.len()];
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            if pts[i].dist_sq(&pts[j]) <= r2 {
                counts[i] += 1;
                counts[j] += 1;
            }
        }
    }
    NnHistogram::from_counts(counts, rel_tol)
}
