use std::f64::consts::SQRT_2;

use super::{centroid_of, normalize_power, Constellation, Point};
use crate::error::{Error, Result};

/// Modulation orders with a published MED reference.
pub const SUPPORTED_ORDERS: [usize; 8] = [8, 16, 32, 64, 128, 256, 512, 1024];

/// Relative tolerance for geometric comparisons on lattice data.
const GEOM_TOL: f64 = 1e-9;

/// Which set of generating vectors spans the 3D grid.
///
/// All three vectors have length `d` and a common `z` component `d/3`; they
/// differ only in the planar angles of their horizontal components.
///
/// * `Tetrahedral`: planar angles 120°, 0°, 240°. The vectors point from the
///   apex of a regular tetrahedron to its base vertices (pairwise inner product
///   `-d²/3`) and generate a body-centred cubic lattice whose minimum distance
///   is exactly `d`. This is the default.
/// * `AsPrinted`: planar angles 60°, 0°, 240°, i.e. the tetrahedral set with
///   the sign of `v1.x` flipped. `v1 + v3 = (0, 0, 2d/3)`, so this grid contains
///   pairs closer than `d`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LatticeBasis {
    #[default]
    Tetrahedral,
    AsPrinted,
}

impl LatticeBasis {
    pub fn name(self) -> &'static str {
        match self {
            LatticeBasis::Tetrahedral => "tetrahedral",
            LatticeBasis::AsPrinted => "printed",
        }
    }
}

impl std::str::FromStr for LatticeBasis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tetrahedral" => Ok(LatticeBasis::Tetrahedral),
            "printed" => Ok(LatticeBasis::AsPrinted),
            other => Err(Error::invalid(format!(
                "unknown basis {other:?} (expected tetrahedral|printed)"
            ))),
        }
    }
}

/// Returns `[v1, v2, v3]` for grid spacing `d`.
pub fn basis_vectors(d: f64, basis: LatticeBasis) -> Result<[[f64; 3]; 3]> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::invalid(format!("grid spacing must be positive, got {d}")));
    }
    let s6 = 6f64.sqrt();
    let v1x = match basis {
        LatticeBasis::Tetrahedral => -SQRT_2 * d / 3.0,
        LatticeBasis::AsPrinted => SQRT_2 * d / 3.0,
    };
    Ok([
        [v1x, s6 * d / 3.0, d / 3.0],
        [2.0 * SQRT_2 * d / 3.0, 0.0, d / 3.0],
        [-SQRT_2 * d / 3.0, -s6 * d / 3.0, d / 3.0],
    ])
}

/// Parameters of a finite piece of the grid `{c1 v1 + c2 v2 + c3 v3 + z0}`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub d: f64,
    pub offset: [f64; 3],
    /// Coefficients range over `-coeff_bound..=coeff_bound`.
    pub coeff_bound: u32,
    pub basis: LatticeBasis,
}

impl GridSpec {
    pub fn new(d: f64, offset: [f64; 3], coeff_bound: u32) -> Self {
        Self {
            d,
            offset,
            coeff_bound,
            basis: LatticeBasis::default(),
        }
    }

    pub fn with_basis(mut self, basis: LatticeBasis) -> Self {
        self.basis = basis;
        self
    }

    /// Coefficient bound that keeps the lowest-energy `m`-subset away from the
    /// enumeration boundary.
    pub fn bound_for_order(m: usize) -> u32 {
        (2.0 * (m as f64).cbrt()).ceil() as u32 + 2
    }
}

/// Enumerates the grid points for all integer coefficient triples within the
/// bound, removes geometric duplicates and sorts by squared norm (ties broken
/// lexicographically on the coordinates).
pub fn generate_grid(spec: &GridSpec) -> Result<Vec<Point>> {
    let [v1, v2, v3] = basis_vectors(spec.d, spec.basis)?;
    if spec.offset.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("grid offset must be finite"));
    }
    let r = spec.coeff_bound as i64;
    let mut points = Vec::with_capacity((2 * r as usize + 1).pow(3));
    for c1 in -r..=r {
        for c2 in -r..=r {
            for c3 in -r..=r {
                let (a, b, c) = (c1 as f64, c2 as f64, c3 as f64);
                let mut p = [0.0; 3];
                for k in 0..3 {
                    p[k] = a * v1[k] + b * v2[k] + c * v3[k] + spec.offset[k];
                }
                points.push(Point::xyz(p[0], p[1], p[2]));
            }
        }
    }
    Ok(sort_dedup(points, GEOM_TOL * spec.d))
}

/// Energy-greedy selection of `m` points.
///
/// The candidate centroid is subtracted first, the `m` candidates with the
/// smallest squared norm are kept (ties broken lexicographically), and the kept
/// subset is shifted to zero centroid. The result is not power-normalized.
pub fn select_constellation(candidates: &[Point], m: usize) -> Result<Constellation> {
    select_lowest_energy(candidates, m, true)
}

fn select_lowest_energy(candidates: &[Point], m: usize, recenter: bool) -> Result<Constellation> {
    if m < 2 {
        return Err(Error::invalid(format!("order must be at least 2, got {m}")));
    }
    if candidates.len() < m {
        return Err(Error::invalid(format!(
            "need at least {m} candidates, got {}",
            candidates.len()
        )));
    }
    let centroid = centroid_of(candidates);
    let shifted: Vec<Point> = candidates.iter().map(|p| p.shifted(&centroid)).collect();
    let scale = shifted
        .iter()
        .map(Point::norm_sq)
        .fold(0.0f64, f64::max)
        .sqrt()
        .max(f64::MIN_POSITIVE);
    let mut chosen = sort_dedup(shifted, GEOM_TOL * scale);
    if chosen.len() < m {
        return Err(Error::invalid(format!(
            "need at least {m} distinct candidates, got {}",
            chosen.len()
        )));
    }
    chosen.truncate(m);
    if recenter {
        let c = centroid_of(&chosen);
        chosen = chosen.iter().map(|p| p.shifted(&c)).collect();
    }
    Constellation::new(chosen)
}

/// Sorts by (squared norm, coordinates) on a quantized key and drops points
/// that coincide with their predecessor within `tol`.
fn sort_dedup(points: Vec<Point>, tol: f64) -> Vec<Point> {
    let q = tol.max(f64::MIN_POSITIVE);
    let key = |p: &Point| -> Vec<i64> {
        std::iter::once(p.norm_sq())
            .chain(p.coords().iter().copied())
            .map(|x| (x / q).round() as i64)
            .collect()
    };
    let mut keyed: Vec<(Vec<i64>, Point)> = points.into_iter().map(|p| (key(&p), p)).collect();
    keyed.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out: Vec<Point> = Vec::with_capacity(keyed.len());
    for (_, p) in keyed {
        let dup = out.last().is_some_and(|last| {
            last.coords()
                .iter()
                .zip(p.coords())
                .all(|(a, b)| (a - b).abs() <= tol)
        });
        if !dup {
            out.push(p);
        }
    }
    out
}

fn check_order(m: usize) -> Result<()> {
    if SUPPORTED_ORDERS.contains(&m) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "unsupported order {m} (supported: 8, 16, 32, 64, 128, 256, 512, 1024)"
        )))
    }
}

/// 3D-HQAM of order `m` on the default (tetrahedral) basis.
pub fn hqam_3d(m: usize) -> Result<Constellation> {
    hqam_3d_with_basis(m, LatticeBasis::default())
}

/// 3D-HQAM of order `m`: grid enumeration, energy-greedy selection for each
/// candidate offset, lowest total energy wins (first offset on ties), then
/// unit-power normalization.
pub fn hqam_3d_with_basis(m: usize, basis: LatticeBasis) -> Result<Constellation> {
    check_order(m)?;
    let [v1, v2, v3] = basis_vectors(1.0, basis)?;
    let half = |vs: &[[f64; 3]]| -> [f64; 3] {
        let mut o = [0.0; 3];
        for v in vs {
            for k in 0..3 {
                o[k] += v[k] / 2.0;
            }
        }
        o
    };
    let offsets = [
        [0.0; 3],
        half(&[v1]),
        half(&[v2]),
        half(&[v3]),
        half(&[v1, v2]),
        half(&[v1, v2, v3]),
    ];
    let bound = GridSpec::bound_for_order(m);
    let mut best: Option<(f64, Constellation)> = None;
    for offset in offsets {
        let spec = GridSpec::new(1.0, offset, bound).with_basis(basis);
        let selected = select_constellation(&generate_grid(&spec)?, m)?;
        let energy = selected.avg_power() * m as f64;
        let better = match &best {
            None => true,
            Some((e, _)) => energy < e - GEOM_TOL * e.max(1.0),
        };
        if better {
            best = Some((energy, selected));
        }
    }
    let (_, c) = best.expect("offset list is non-empty");
    normalize_power(&c)
}

/// Triangular lattice with unit spacing: `a (1, 0) + b (1/2, √3/2)`.
fn triangular_grid(bound: i64, offset: [f64; 2]) -> Vec<Point> {
    let h = 3f64.sqrt() / 2.0;
    let mut out = Vec::with_capacity((2 * bound as usize + 1).pow(2));
    for a in -bound..=bound {
        for b in -bound..=bound {
            let (a, b) = (a as f64, b as f64);
            out.push(Point::xy(a + 0.5 * b + offset[0], h * b + offset[1]));
        }
    }
    out
}

/// 2D-HQAM baseline of order `m`.
///
/// Energy-greedy selection from the unit triangular lattice with the same
/// offset search as the 3D family. The selected points are measured about the
/// lattice point at the centre of the candidate set and are *not* shifted to
/// zero centroid afterwards; for `m = 8` the result therefore has a small
/// non-zero mean. Output is normalized to unit average power.
pub fn hqam_2d(m: usize) -> Result<Constellation> {
    check_order(m)?;
    let h = 3f64.sqrt() / 2.0;
    let offsets = [
        [0.0, 0.0],
        [0.5, 0.0],
        [0.25, h / 2.0],
        [0.75, h / 2.0],
        [0.5, h / 3.0],
    ];
    let bound = (m as f64).sqrt().ceil() as i64 + 2;
    let mut best: Option<(f64, Constellation)> = None;
    for offset in offsets {
        let selected = select_lowest_energy(&triangular_grid(bound, offset), m, false)?;
        let energy = selected.avg_power() * m as f64;
        let better = match &best {
            None => true,
            Some((e, _)) => energy < e - GEOM_TOL * e.max(1.0),
        };
        if better {
            best = Some((energy, selected));
        }
    }
    let (_, c) = best.expect("offset list is non-empty");
    normalize_power(&c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn norm(v: [f64; 3]) -> f64 {
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    #[test]
    fn basis_vectors_have_length_d() {
        for basis in [LatticeBasis::Tetrahedral, LatticeBasis::AsPrinted] {
            for v in basis_vectors(1.0, basis).unwrap() {
                assert!((norm(v) - 1.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn basis_v2_scales_with_d() {
        let [_, v2, _] = basis_vectors(3.0, LatticeBasis::AsPrinted).unwrap();
        assert!((v2[0] - 2.0 * SQRT_2).abs() < 1e-15);
        assert_eq!(v2[1], 0.0);
        assert!((v2[2] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonpositive_spacing_rejected() {
        assert!(basis_vectors(0.0, LatticeBasis::Tetrahedral).is_err());
        assert!(basis_vectors(-1.0, LatticeBasis::AsPrinted).is_err());
        assert!(basis_vectors(f64::NAN, LatticeBasis::AsPrinted).is_err());
    }

    #[test]
    fn tetrahedral_basis_has_tetrahedral_angles() {
        let b = basis_vectors(1.0, LatticeBasis::Tetrahedral).unwrap();
        for i in 0..3 {
            for j in i + 1..3 {
                let dot: f64 = (0..3).map(|k| b[i][k] * b[j][k]).sum();
                assert!((dot + 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_bound_grid_is_the_offset() {
        let g = generate_grid(&GridSpec::new(1.0, [0.5, -0.25, 2.0], 0)).unwrap();
        assert_eq!(g, vec![Point::xyz(0.5, -0.25, 2.0)]);
    }

    #[test]
    fn printed_grid_contains_short_vertical_vector() {
        let spec = GridSpec::new(1.0, [0.0; 3], 1).with_basis(LatticeBasis::AsPrinted);
        let g = generate_grid(&spec).unwrap();
        assert_eq!(g.len(), 27);
        assert_eq!(g[0].norm_sq(), 0.0);
        let target = Point::xyz(0.0, 0.0, 2.0 / 3.0);
        assert!(g.iter().any(|p| p.dist(&target) < 1e-12));
        // the short vector makes the grid's minimum distance 2d/3, not d
        assert!((super::super::med_of(&g).unwrap() - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tetrahedral_grid_minimum_distance_is_d() {
        let g = generate_grid(&GridSpec::new(2.5, [0.0; 3], 2)).unwrap();
        assert!((super::super::med_of(&g).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn grid_is_sorted_by_norm() {
        let g = generate_grid(&GridSpec::new(1.0, [0.1, 0.2, 0.3], 2)).unwrap();
        assert!(g.windows(2).all(|w| w[0].norm_sq() <= w[1].norm_sq() + 1e-9));
    }

    #[test]
    fn too_few_candidates_rejected() {
        let g = generate_grid(&GridSpec::new(1.0, [0.0; 3], 0)).unwrap();
        assert!(matches!(
            select_constellation(&g, 2),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn selecting_every_candidate_keeps_them_all() {
        let g = generate_grid(&GridSpec::new(1.0, [0.0; 3], 1)).unwrap();
        let c = select_constellation(&g, g.len()).unwrap();
        assert_eq!(c.order(), 27);
    }

    #[test]
    fn selection_is_recentered() {
        let g = generate_grid(&GridSpec::new(1.0, [0.3, 0.1, -0.2], 3)).unwrap();
        let c = select_constellation(&g, 8).unwrap();
        assert!(c.centroid().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn unsupported_orders_rejected() {
        for m in [0, 2, 7, 10, 2048] {
            assert!(hqam_2d(m).is_err());
            assert!(hqam_3d(m).is_err());
        }
    }

    #[test]
    fn larger_bound_does_not_change_selection() {
        for m in [8, 64, 256] {
            let grid = |extra: u32| {
                let spec = GridSpec::new(1.0, [0.0; 3], GridSpec::bound_for_order(m) + extra);
                select_constellation(&generate_grid(&spec).unwrap(), m).unwrap()
            };
            // same subset; coordinates differ only by centroid rounding
            let (a, b) = (grid(0), grid(2));
            assert!(a.points().iter().zip(b.points()).all(|(p, q)| p.dist(q) < 1e-12), "order {m}");
        }
    }

    const MED_2D: [f64; 8] = [
        0.9428, 0.6666, 0.47634, 0.33588, 0.23776, 0.16837, 0.11900, 0.084047,
    ];
    const MED_3D: [f64; 8] = [
        1.0573, 0.91654, 0.69943, 0.55974, 0.4384, 0.34664, 0.27552, 0.2192,
    ];

    #[test]
    fn reference_meds_2d() {
        for (m, want) in SUPPORTED_ORDERS.iter().zip(MED_2D) {
            let got = hqam_2d(*m).unwrap().med();
            assert!((got / want - 1.0).abs() < 0.01, "M={m}: {got} vs {want}");
        }
    }

    #[test]
    fn reference_meds_3d_small_orders() {
        for (m, want) in SUPPORTED_ORDERS.iter().zip(MED_3D).take(5) {
            let got = hqam_3d(*m).unwrap().med();
            assert!((got / want - 1.0).abs() < 0.05, "M={m}: {got} vs {want}");
        }
    }

    #[test]
    fn constructions_are_normalized_and_deterministic() {
        for m in [8, 16, 64, 256] {
            let a = hqam_3d(m).unwrap();
            assert_eq!(a, hqam_3d(m).unwrap());
            assert_eq!(a.order(), m);
            assert!((a.avg_power() - 1.0).abs() < 1e-12);
            assert!(a.centroid().iter().all(|x| x.abs() < 1e-9));
            let b = hqam_2d(m).unwrap();
            assert_eq!(b, hqam_2d(m).unwrap());
            assert!((b.avg_power() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn med_decreases_with_order_and_3d_beats_2d() {
        let d2: Vec<f64> = SUPPORTED_ORDERS.iter().map(|&m| hqam_2d(m).unwrap().med()).collect();
        let d3: Vec<f64> = SUPPORTED_ORDERS.iter().map(|&m| hqam_3d(m).unwrap().med()).collect();
        assert!(d2.windows(2).all(|w| w[1] < w[0]));
        assert!(d3.windows(2).all(|w| w[1] < w[0]));
        assert!(d2.iter().zip(&d3).all(|(a, b)| b > a));
    }

    #[test]
    fn small_2d_orders_match_shell_energies() {
        // lattice-point-centred shells: r² = 0 (1), 1 (6), 3 (6), 4 (6), 7 (12), 9 (6)
        for (m, energy) in [(8, 9.0), (16, 36.0), (32, 141.0)] {
            let c = hqam_2d(m).unwrap();
            let expected = (m as f64 / energy).sqrt();
            assert!((c.med() - expected).abs() < 1e-12, "order {m}");
        }
    }
}
