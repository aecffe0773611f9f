//! Seeded AWGN Monte Carlo simulation with maximum-likelihood detection.
//!
//! Every SNR point is split into a fixed number of partitions. Each partition
//! owns a ChaCha8 stream keyed by `(seed, SNR, partition)`, and work proceeds
//! in rounds of fixed per-partition batches, so the outcome depends only on the
//! configuration and never on thread scheduling.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{Constellation, Point};
use crate::sep::{CurvePoint, SepCurve, SnrPoint};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

const BATCH: u64 = 4096;

/// Per-dimension noise standard deviation `σ = √(N0/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    sigma: f64,
}

impl NoiseModel {
    pub fn new(sigma: f64) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid(format!("noise sigma must be positive, got {sigma}")));
        }
        Ok(Self { sigma })
    }

    /// `σ = √(Es / (2γ))`.
    pub fn from_snr(es: f64, snr: SnrPoint) -> Result<Self> {
        if !(snr.gamma > 0.0) {
            return Err(Error::invalid("simulation needs a positive SNR"));
        }
        Self::new((es / (2.0 * snr.gamma)).sqrt())
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }
}

/// `y = x + w` with i.i.d. `N(0, σ²)` components; draws exactly `x.dim()`
/// normals from `rng`.
pub fn add_noise<R: Rng + ?Sized>(x: &Point, sigma: f64, rng: &mut R) -> Point {
    let coords = x
        .coords()
        .iter()
        .map(|c| c + sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Point::new(coords).expect("finite input plus finite noise")
}

/// Index of the nearest constellation point, smallest index on ties.
pub fn ml_detect(y: &Point, c: &Constellation) -> Result<usize> {
    if y.dim() != c.dim() {
        return Err(Error::invalid(format!(
            "received point is {}D but the constellation is {}D",
            y.dim(),
            c.dim()
        )));
    }
    Ok(nearest_brute(y.coords(), &flat(c), c.dim()))
}

fn flat(c: &Constellation) -> Vec<[f64; 3]> {
    c.points()
        .iter()
        .map(|p| {
            let v = p.coords();
            [v[0], v[1], v.get(2).copied().unwrap_or(0.0)]
        })
        .collect()
}

fn dist_sq(a: &[f64], b: &[f64; 3], dim: usize) -> f64 {
    (0..dim).map(|k| (a[k] - b[k]) * (a[k] - b[k])).sum()
}

fn nearest_brute(y: &[f64], pts: &[[f64; 3]], dim: usize) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, p) in pts.iter().enumerate() {
        let d = dist_sq(y, p, dim);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Nearest-point search over a uniform grid of cells of side `MED`.
///
/// Cells are visited in Chebyshev rings around the cell of the query; the
/// search stops once the best distance found is strictly smaller than the
/// distance to any unvisited ring. The answer (including the smallest-index
/// tie rule) is identical to the brute-force scan.
#[derive(Debug, Clone)]
pub struct Detector {
    pts: Vec<[f64; 3]>,
    dim: usize,
    origin: [f64; 3],
    cell: f64,
    shape: [i64; 3],
    /// Point indices per cell, ascending, flattened in `starts` ranges.
    starts: Vec<usize>,
    members: Vec<usize>,
}

impl Detector {
    pub fn new(c: &Constellation) -> Self {
        let pts = flat(c);
        let dim = c.dim();
        let cell = c.med();
        let mut lo = [0.0f64; 3];
        let mut hi = [0.0f64; 3];
        for k in 0..dim {
            lo[k] = pts.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min);
            hi[k] = pts.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max);
        }
        let mut shape = [1i64; 3];
        for k in 0..dim {
            shape[k] = ((hi[k] - lo[k]) / cell).floor() as i64 + 1;
        }
        let n_cells = (shape[0] * shape[1] * shape[2]) as usize;
        let mut buckets: Vec<Vec<usize>> = vec![Vec::new(); n_cells];
        let mut det = Self {
            pts,
            dim,
            origin: lo,
            cell,
            shape,
            starts: Vec::new(),
            members: Vec::new(),
        };
        for (i, p) in det.pts.iter().enumerate() {
            let idx = det.cell_of(p).map(|(k, s)| k.clamp(0, s - 1));
            buckets[det.linear(idx)].push(i);
        }
        let mut starts = Vec::with_capacity(n_cells + 1);
        starts.push(0);
        for b in &buckets {
            det.members.extend_from_slice(b);
            starts.push(det.members.len());
        }
        det.starts = starts;
        det
    }

    fn cell_of(&self, y: &[f64; 3]) -> [(i64, i64); 3] {
        std::array::from_fn(|k| {
            if k < self.dim {
                (((y[k] - self.origin[k]) / self.cell).floor() as i64, self.shape[k])
            } else {
                (0, 1)
            }
        })
    }

    fn linear(&self, idx: [i64; 3]) -> usize {
        ((idx[0] * self.shape[1] + idx[1]) * self.shape[2] + idx[2]) as usize
    }

    pub fn detect(&self, y: &[f64]) -> usize {
        let mut q = [0.0; 3];
        q[..self.dim].copy_from_slice(&y[..self.dim]);
        // far outside the grid the ring search degenerates; scan instead
        let raw = self.cell_of(&q);
        let outside: i64 = raw
            .iter()
            .map(|&(k, s)| if k < 0 { -k } else if k >= s { k - s + 1 } else { 0 })
            .max()
            .unwrap_or(0);
        if outside > 2 {
            return nearest_brute(y, &self.pts, self.dim);
        }
        let c = raw.map(|(k, _)| k);
        let max_r = (0..3).map(|k| self.shape[k] + outside + 1).max().unwrap_or(1);
        let (mut best, mut best_d) = (usize::MAX, f64::INFINITY);
        for r in 0..=max_r {
            let span = |k: usize| -> (i64, i64) {
                if k < self.dim {
                    ((c[k] - r).max(0), (c[k] + r).min(self.shape[k] - 1))
                } else {
                    (0, 0)
                }
            };
            let (a0, a1) = span(0);
            let (b0, b1) = span(1);
            let (e0, e1) = span(2);
            for i in a0..=a1 {
                for j in b0..=b1 {
                    for l in e0..=e1 {
                        let ring = (i - c[0]).abs().max((j - c[1]).abs()).max((l - c[2]).abs());
                        if ring != r {
                            continue;
                        }
                        let cell = self.linear([i, j, l]);
                        for &m in &self.members[self.starts[cell]..self.starts[cell + 1]] {
                            let d = dist_sq(y, &self.pts[m], self.dim);
                            if d < best_d || (d == best_d && m < best) {
                                best_d = d;
                                best = m;
                            }
                        }
                    }
                }
            }
            // every unvisited point lies at least r cells away from the query
            let reach = r as f64 * self.cell * (1.0 - 1e-9);
            if best != usize::MAX && best_d.sqrt() < reach {
                return best;
            }
        }
        best
    }
}

/// Which energy `Es` defines `γ = Es/N0` when computing the noise level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnergyReference {
    /// The constellation's actual average power.
    #[default]
    Constellation,
    /// Unit energy regardless of the constellation's power.
    Unit,
}

impl std::str::FromStr for EnergyReference {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "constellation" => Ok(EnergyReference::Constellation),
            "unit" => Ok(EnergyReference::Unit),
            other => Err(Error::invalid(format!(
                "unknown energy reference {other:?} (expected constellation|unit)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub snr_points: Vec<SnrPoint>,
    pub max_symbols: u64,
    /// Stop a point once this many errors are seen; 0 disables early stopping.
    pub target_errors: u64,
    pub seed: u64,
    pub worker_partitions: usize,
    #[serde(default)]
    pub energy_reference: EnergyReference,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            snr_points: Vec::new(),
            max_symbols: 10_000_000,
            target_errors: 200,
            seed: 0,
            worker_partitions: 8,
            energy_reference: EnergyReference::Constellation,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_symbols < 1 {
            return Err(Error::invalid("max_symbols must be at least 1"));
        }
        if self.worker_partitions < 1 {
            return Err(Error::invalid("worker_partitions must be at least 1"));
        }
        if self.snr_points.windows(2).any(|w| !(w[1].esn0_db > w[0].esn0_db)) {
            return Err(Error::invalid("SNR points must be strictly increasing"));
        }
        Ok(())
    }
}

/// Outcome at one SNR point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub esn0_db: f64,
    pub gamma: f64,
    pub symbols_sent: u64,
    pub error_count: u64,
    pub sep_estimate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    #[serde(skip)]
    pub elapsed: Duration,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub constellation_hash: String,
    pub config: SimConfig,
    pub points: Vec<PointReport>,
}

impl SimReport {
    pub fn to_curve(&self, label: impl Into<String>) -> Result<SepCurve> {
        let pts = self
            .points
            .iter()
            .map(|p| CurvePoint {
                esn0_db: p.esn0_db,
                sep: p.sep_estimate,
                ci: Some((p.ci_low, p.ci_high)),
                symbols: Some(p.symbols_sent),
                errors: Some(p.error_count),
            })
            .collect();
        SepCurve::new(label, pts)
    }
}

/// 95% Wilson score interval for `errors` out of `n` trials; `(0, 1)` when
/// `n = 0`.
pub fn wilson_interval(errors: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = errors as f64 / n_f;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// SHA-256 over the dimension and the little-endian bit patterns of all
/// coordinates, hex encoded.
pub fn constellation_hash(c: &Constellation) -> String {
    let mut h = Sha256::new();
    h.update((c.dim() as u64).to_le_bytes());
    for v in c.flat_coords() {
        h.update(v.to_bits().to_le_bytes());
    }
    hex::encode(h.finalize())
}

fn stream_seed(seed: u64, snr: SnrPoint) -> u64 {
    // splitmix64 finalizer over the SNR bit pattern
    let mut z = snr.esn0_db.to_bits().wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    seed ^ z ^ (z >> 31)
}

struct Partition {
    rng: ChaCha8Rng,
    symbols: u64,
    errors: u64,
}

/// Simulates one SNR point.
pub fn monte_carlo_sep(c: &Constellation, snr: SnrPoint, cfg: &SimConfig) -> Result<PointReport> {
    cfg.validate()?;
    let det = Detector::new(c);
    run_point(c, &det, snr, cfg)
}

fn run_point(c: &Constellation, det: &Detector, snr: SnrPoint, cfg: &SimConfig) -> Result<PointReport> {
    let start = Instant::now();
    let es = match cfg.energy_reference {
        EnergyReference::Constellation => c.avg_power(),
        EnergyReference::Unit => 1.0,
    };
    let sigma = NoiseModel::from_snr(es, snr)?.sigma();
    let m = c.order();
    let dim = c.dim();
    let pts = flat(c);
    let parts = cfg.worker_partitions as u64;
    let base = stream_seed(cfg.seed, snr);
    let mut partitions: Vec<Partition> = (0..parts)
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(base);
            rng.set_stream(k);
            Partition {
                rng,
                symbols: 0,
                errors: 0,
            }
        })
        .collect();

    let (mut sent, mut errors) = (0u64, 0u64);
    while sent < cfg.max_symbols && (cfg.target_errors == 0 || errors < cfg.target_errors) {
        let quota = (BATCH * parts).min(cfg.max_symbols - sent);
        partitions.par_iter_mut().enumerate().for_each(|(k, part)| {
            let n = quota / parts + u64::from((k as u64) < quota % parts);
            let mut y = [0.0f64; 3];
            for _ in 0..n {
                let tx = part.rng.random_range(0..m);
                for d in 0..dim {
                    y[d] = pts[tx][d] + sigma * part.rng.sample::<f64, _>(StandardNormal);
                }
                if det.detect(&y[..dim]) != tx {
                    part.errors += 1;
                }
            }
            part.symbols += n;
        });
        sent = partitions.iter().map(|p| p.symbols).sum();
        errors = partitions.iter().map(|p| p.errors).sum();
    }

    let (ci_low, ci_high) = wilson_interval(errors, sent);
    Ok(PointReport {
        esn0_db: snr.esn0_db,
        gamma: snr.gamma,
        symbols_sent: sent,
        error_count: errors,
        sep_estimate: errors as f64 / sent as f64,
        ci_low,
        ci_high,
        elapsed: start.elapsed(),
    })
}

/// Simulates every SNR point of `cfg` and returns the report and its curve.
pub fn sweep(c: &Constellation, cfg: &SimConfig) -> Result<(SimReport, SepCurve)> {
    cfg.validate()?;
    let det = Detector::new(c);
    let points = cfg
        .snr_points
        .iter()
        .map(|&s| run_point(c, &det, s, cfg))
        .collect::<Result<Vec<_>>>()?;
    let report = SimReport {
        seed: cfg.seed,
        constellation_hash: constellation_hash(c),
        config: cfg.clone(),
        points,
    };
    let curve = report.to_curve("simulated")?;
    Ok((report, curve))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{hqam_2d, hqam_3d};
    use crate::sep::q_function;

    fn cfg(db: &[f64], max: u64, target: u64) -> SimConfig {
        SimConfig {
            snr_points: db.iter().map(|&d| SnrPoint::from_db(d).unwrap()).collect(),
            max_symbols: max,
            target_errors: target,
            seed: 7,
            ..SimConfig::default()
        }
    }

    #[test]
    fn noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Point::xyz(0.5, -1.0, 2.0);
        let sigma = 0.3;
        let n = 1_000_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let y = add_noise(&x, sigma, &mut rng);
            for k in 0..3 {
                let d = y.coords()[k] - x.coords()[k];
                sum[k] += d;
                sq[k] += d * d;
            }
        }
        for k in 0..3 {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            assert!(mean.abs() < 4.0 * sigma / (n as f64).sqrt());
            assert!((var / (sigma * sigma) - 1.0).abs() < 0.02);
        }
    }

    #[test]
    fn tiny_noise_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Point::xy(1.0, 2.0);
        assert!(add_noise(&x, 1e-300, &mut rng).dist(&x) < 1e-250);
    }

    #[test]
    fn noise_is_reproducible() {
        let x = Point::xy(0.0, 0.0);
        let run = || {
            let mut rng = ChaCha8Rng::seed_from_u64(3);
            (0..10).map(|_| add_noise(&x, 1.0, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn detection_basics() {
        let c = hqam_3d(16).unwrap();
        for (k, p) in c.points().iter().enumerate() {
            assert_eq!(ml_detect(p, &c).unwrap(), k);
        }
        let pair = Constellation::new(vec![Point::xy(-1.0, 0.0), Point::xy(1.0, 0.0)]).unwrap();
        assert_eq!(ml_detect(&Point::xy(0.0, 5.0), &pair).unwrap(), 0);
        assert!(ml_detect(&Point::xyz(0.0, 0.0, 0.0), &pair).is_err());
    }

    #[test]
    fn detector_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for c in [hqam_2d(64).unwrap(), hqam_3d(256).unwrap(), hqam_2d(8).unwrap()] {
            let det = Detector::new(&c);
            let pts = flat(&c);
            for i in 0..20_000 {
                let spread = [0.3, 1.0, 3.0, 30.0][i % 4];
                let y: Vec<f64> = (0..c.dim()).map(|_| spread * rng.random_range(-1.0..1.0)).collect();
                assert_eq!(det.detect(&y), nearest_brute(&y, &pts, c.dim()));
            }
            // exact midpoints exercise the tie rule
            for w in c.points().windows(2) {
                let mid: Vec<f64> = w[0].coords().iter().zip(w[1].coords()).map(|(a, b)| (a + b) / 2.0).collect();
                assert_eq!(det.detect(&mid), nearest_brute(&mid, &pts, c.dim()));
            }
        }
    }

    #[test]
    fn wilson_bounds() {
        assert_eq!(wilson_interval(0, 0), (0.0, 1.0));
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
        let (lo, hi) = wilson_interval(50, 100);
        assert!((lo - 0.4038).abs() < 1e-3 && (hi - 0.5962).abs() < 1e-3);
    }

    #[test]
    fn noise_free_limit() {
        let c = hqam_3d(16).unwrap();
        let r = monte_carlo_sep(&c, SnrPoint::from_db(60.0).unwrap(), &cfg(&[], 100_000, 200)).unwrap();
        assert_eq!((r.symbols_sent, r.error_count, r.sep_estimate), (100_000, 0, 0.0));
    }

    #[test]
    fn antipodal_pair_matches_q() {
        let c = Constellation::new(vec![Point::xy(1.0, 0.0), Point::xy(-1.0, 0.0)]).unwrap();
        // δ = 2 at unit power, so δ√(γ/2) = 1 at γ = 1/2
        let snr = SnrPoint::from_linear(0.5).unwrap();
        let r = monte_carlo_sep(&c, snr, &cfg(&[], 200_000, 0)).unwrap();
        let width = r.ci_high - r.ci_low;
        assert!((r.sep_estimate - q_function(1.0)).abs() < 3.0 * width);
    }

    #[test]
    fn early_stop_and_determinism() {
        let c = hqam_2d(16).unwrap();
        let conf = cfg(&[0.0, 10.0], 1_000_000, 200);
        let (a, ca) = sweep(&c, &conf).unwrap();
        let (b, cb) = sweep(&c, &conf).unwrap();
        assert_eq!(ca, cb);
        assert_eq!(a.points[0].symbols_sent, b.points[0].symbols_sent);
        assert!(a.points[0].error_count >= 200);
        assert!(a.points[0].symbols_sent <= BATCH * 8);
        assert_eq!(a.constellation_hash, constellation_hash(&c));
    }

    #[test]
    fn partition_count_is_part_of_the_outcome_but_threads_are_not() {
        let c = hqam_2d(16).unwrap();
        let conf = cfg(&[8.0], 50_000, 0);
        let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let one = pool(1).install(|| sweep(&c, &conf).unwrap().1);
        let four = pool(4).install(|| sweep(&c, &conf).unwrap().1);
        assert_eq!(one, four);
        let merged = sweep(&c, &SimConfig { worker_partitions: 3, ..conf.clone() }).unwrap().0;
        assert_eq!(merged.points[0].symbols_sent, 50_000);
    }

    #[test]
    fn empty_and_single_point_sweeps() {
        let c = hqam_2d(8).unwrap();
        assert!(sweep(&c, &cfg(&[], 1000, 10)).unwrap().1.is_empty());
        assert_eq!(sweep(&c, &cfg(&[5.0], 1000, 10)).unwrap().1.len(), 1);
    }

    #[test]
    fn invalid_configs_rejected() {
        let c = hqam_2d(8).unwrap();
        assert!(sweep(&c, &cfg(&[5.0, 5.0], 10, 1)).is_err());
        assert!(sweep(&c, &cfg(&[5.0], 0, 1)).is_err());
        assert!(sweep(&c, &SimConfig { worker_partitions: 0, ..cfg(&[1.0], 10, 1) }).is_err());
    }

    #[test]
    fn energy_reference_scales_noise() {
        let c = hqam_2d(16).unwrap().scaled(2.0).unwrap();
        let snr = SnrPoint::from_db(10.0).unwrap();
        let unit = SimConfig { energy_reference: EnergyReference::Unit, ..cfg(&[], 20_000, 0) };
        let own = cfg(&[], 20_000, 0);
        let a = monte_carlo_sep(&c, snr, &unit).unwrap().sep_estimate;
        let b = monte_carlo_sep(&c, snr, &own).unwrap().sep_estimate;
        assert!(a < b);
    }
}
