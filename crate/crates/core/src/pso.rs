//! MED-preserving 3D → 2D linear projection found by global-best particle
//! swarm optimization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Constellation, Point};

/// Fitness assigned when a projection maps two points onto each other.
pub const COLLAPSE_PENALTY: f64 = 1e12;

/// Projected MEDs below this count as a collapse.
const COLLAPSE_MED: f64 = 1e-12;

/// A 3×2 real matrix mapping row vectors `x ∈ ℝ³` to `x·P ∈ ℝ²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProjectionMatrix {
    entries: [[f64; 2]; 3],
}

impl ProjectionMatrix {
    pub fn new(entries: [[f64; 2]; 3]) -> Result<Self> {
        if entries.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("projection matrix entries must be finite"));
        }
        Ok(Self { entries })
    }

    /// Row-major: `[p11, p12, p21, p22, p31, p32]`.
    pub fn from_flat(v: &[f64; 6]) -> Result<Self> {
        Self::new([[v[0], v[1]], [v[2], v[3]], [v[4], v[5]]])
    }

    pub fn to_flat(&self) -> [f64; 6] {
        let e = &self.entries;
        [e[0][0], e[0][1], e[1][0], e[1][1], e[2][0], e[2][1]]
    }

    pub fn entries(&self) -> &[[f64; 2]; 3] {
        &self.entries
    }

    /// Keeps the first two coordinates.
    pub fn drop_z() -> Self {
        Self {
            entries: [[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]],
        }
    }

    pub fn zeros() -> Self {
        Self {
            entries: [[0.0; 2]; 3],
        }
    }

    fn apply(&self, x: &[f64]) -> [f64; 2] {
        let e = &self.entries;
        [
            x[0] * e[0][0] + x[1] * e[1][0] + x[2] * e[2][0],
            x[0] * e[0][1] + x[1] * e[1][1] + x[2] * e[2][1],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsoConfig {
    pub n_particles: usize,
    pub n_iterations: usize,
    pub inertia: f64,
    pub accel_personal: f64,
    pub accel_social: f64,
    pub lower: f64,
    pub upper: f64,
    pub velocity_clamp: f64,
    pub seed: u64,
    /// Weight λ of the optional `λ·(P_proj − P_3d)²` average-power penalty.
    pub power_penalty: f64,
}

impl Default for PsoConfig {
    fn default() -> Self {
        Self {
            n_particles: 60,
            n_iterations: 1000,
            inertia: 0.729,
            accel_personal: 1.49445,
            accel_social: 1.49445,
            lower: -2.0,
            upper: 2.0,
            velocity_clamp: 0.4,
            seed: 0,
            power_penalty: 0.0,
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::invalid(m.to_string()));
        if self.n_particles < 2 {
            return fail("PSO needs at least 2 particles");
        }
        if self.n_iterations < 1 {
            return fail("PSO needs at least 1 iteration");
        }
        if !(self.lower.is_finite() && self.upper.is_finite() && self.lower < self.upper) {
            return fail("PSO bounds must satisfy lower < upper");
        }
        if !(self.inertia > 0.0 && self.inertia < 1.0) {
            return fail("inertia must lie in (0, 1)");
        }
        if !(self.accel_personal > 0.0 && self.accel_social > 0.0)
            || !(self.accel_personal.is_finite() && self.accel_social.is_finite())
        {
            return fail("acceleration coefficients must be positive");
        }
        if !(self.velocity_clamp > 0.0 && self.velocity_clamp.is_finite()) {
            return fail("velocity clamp must be positive");
        }
        if !(self.power_penalty >= 0.0 && self.power_penalty.is_finite()) {
            return fail("power penalty must be non-negative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsoTrace {
    /// Global-best fitness after each iteration (the initial evaluation is not
    /// included), so the length equals the iteration count.
    pub best_fitness_per_iteration: Vec<f64>,
    pub final_matrix: ProjectionMatrix,
    pub final_fitness: f64,
    pub seed: u64,
}

/// Maps every point of a 3D constellation through `P`. The result is not
/// re-normalized; MED and average power are recomputed.
pub fn project(x: &Constellation, p: &ProjectionMatrix) -> Result<Constellation> {
    if x.dim() != 3 {
        return Err(Error::invalid(format!(
            "projection needs a 3D constellation, got {}D",
            x.dim()
        )));
    }
    let points = x
        .points()
        .iter()
        .map(|pt| {
            let [a, b] = p.apply(pt.coords());
            Point::xy(a, b)
        })
        .collect();
    Constellation::new(points)
}

/// `(med(X·P) − target)²`, or [`COLLAPSE_PENALTY`] if two points coincide.
pub fn objective(p: &ProjectionMatrix, x: &Constellation, target_med: f64) -> f64 {
    Objective::new(x, target_med, 0.0).eval(p)
}

/// Fitness evaluator with pre-extracted coordinates and scratch space.
struct Objective {
    coords: Vec<[f64; 3]>,
    target_med: f64,
    power_penalty: f64,
    power_3d: f64,
    scratch: Vec<[f64; 2]>,
}

impl Objective {
    fn new(x: &Constellation, target_med: f64, power_penalty: f64) -> Self {
        let coords = x
            .points()
            .iter()
            .map(|p| {
                let c = p.coords();
                [c[0], c[1], c.get(2).copied().unwrap_or(0.0)]
            })
            .collect::<Vec<_>>();
        let n = coords.len();
        Self {
            coords,
            target_med,
            power_penalty,
            power_3d: x.avg_power(),
            scratch: Vec::with_capacity(n),
        }
    }

    fn eval(&mut self, p: &ProjectionMatrix) -> f64 {
        self.scratch.clear();
        self.scratch.extend(self.coords.iter().map(|c| p.apply(c)));
        let med = sweep_med(&mut self.scratch);
        if !(med >= COLLAPSE_MED) {
            return COLLAPSE_PENALTY;
        }
        let mut f = (med - self.target_med).powi(2);
        if self.power_penalty > 0.0 {
            let power = self.scratch.iter().map(|q| q[0] * q[0] + q[1] * q[1]).sum::<f64>()
                / self.scratch.len() as f64;
            f += self.power_penalty * (power - self.power_3d).powi(2);
        }
        f
    }
}

/// Exact minimum pairwise distance of planar points by an x-sorted sweep.
/// Reorders `pts`.
fn sweep_med(pts: &mut [[f64; 2]]) -> f64 {
    pts.sort_unstable_by(|a, b| a[0].total_cmp(&b[0]));
    let mut best = f64::INFINITY;
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let dx = pts[j][0] - pts[i][0];
            if dx * dx >= best {
                break;
            }
            let dy = pts[j][1] - pts[i][1];
            let d = dx * dx + dy * dy;
            if d < best {
                best = d;
            }
        }
    }
    best.sqrt()
}

/// Global-best PSO over the six entries of `P` (row-major encoding).
pub fn pso_optimize(x: &Constellation, target_med: f64, cfg: &PsoConfig) -> Result<PsoTrace> {
    cfg.validate()?;
    if x.dim() != 3 {
        return Err(Error::invalid(format!(
            "projection needs a 3D constellation, got {}D",
            x.dim()
        )));
    }
    if !(target_med.is_finite() && target_med > 0.0) {
        return Err(Error::invalid(format!("target MED must be positive, got {target_med}")));
    }

    let mut f = Objective::new(x, target_med, cfg.power_penalty);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let (lb, ub) = (cfg.lower, cfg.upper);
    let n = cfg.n_particles;

    let mut pos: Vec<[f64; 6]> = (0..n)
        .map(|_| std::array::from_fn(|_| lb + (ub - lb) * rng.random::<f64>()))
        .collect();
    let mut vel = vec![[0.0f64; 6]; n];
    let mut pbest = pos.clone();
    let mut pbest_fit: Vec<f64> = pos.iter().map(|p| f.eval(&matrix(p))).collect();
    let mut g = 0;
    for i in 1..n {
        if pbest_fit[i] < pbest_fit[g] {
            g = i;
        }
    }
    let mut gbest = pbest[g];
    let mut gbest_fit = pbest_fit[g];

    let mut trace = Vec::with_capacity(cfg.n_iterations);
    for _ in 0..cfg.n_iterations {
        for i in 0..n {
            let r1: [f64; 6] = std::array::from_fn(|_| rng.random());
            let r2: [f64; 6] = std::array::from_fn(|_| rng.random());
            for k in 0..6 {
                let v = cfg.inertia * vel[i][k]
                    + cfg.accel_personal * r1[k] * (pbest[i][k] - pos[i][k])
                    + cfg.accel_social * r2[k] * (gbest[k] - pos[i][k]);
                vel[i][k] = v.clamp(-cfg.velocity_clamp, cfg.velocity_clamp);
                pos[i][k] = (pos[i][k] + vel[i][k]).clamp(lb, ub);
            }
        }
        for i in 0..n {
            let fit = f.eval(&matrix(&pos[i]));
            if fit < pbest_fit[i] {
                pbest_fit[i] = fit;
                pbest[i] = pos[i];
                if fit < gbest_fit {
                    gbest_fit = fit;
                    gbest = pos[i];
                }
            }
        }
        trace.push(gbest_fit);
    }

    Ok(PsoTrace {
        best_fitness_per_iteration: trace,
        final_matrix: matrix(&gbest),
        final_fitness: gbest_fit,
        seed: cfg.seed,
    })
}

fn matrix(v: &[f64; 6]) -> ProjectionMatrix {
    ProjectionMatrix {
        entries: [[v[0], v[1]], [v[2], v[3]], [v[4], v[5]]],
    }
}

/// Runs `restarts` independent optimizations with seeds `cfg.seed + k` and
/// keeps the lowest final fitness (lowest `k` on ties).
pub fn multi_start(
    x: &Constellation,
    target_med: f64,
    cfg: &PsoConfig,
    restarts: usize,
) -> Result<PsoTrace> {
    if restarts == 0 {
        return Err(Error::invalid("at least one restart is required"));
    }
    let runs = (0..restarts as u64)
        .into_par_iter()
        .map(|k| {
            let cfg = PsoConfig {
                seed: cfg.seed.wrapping_add(k),
                ..cfg.clone()
            };
            pso_optimize(x, target_med, &cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut best = 0;
    for (k, run) in runs.iter().enumerate() {
        if run.final_fitness < runs[best].final_fitness {
            best = k;
        }
    }
    Ok(runs.into_iter().nth(best).expect("restarts >= 1"))
}
