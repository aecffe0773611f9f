//! Three-dimensional hexagonal QAM (3D-HQAM) constellations.
//!
//! The crate covers the full pipeline from construction to error rates:
//!
//! - [`geometry`]: lattice construction, energy-greedy point selection, power
//!   normalization, minimum Euclidean distance (MED) and nearest-neighbour counts
//!   for both the 3D constellations and the 2D-HQAM baseline.
//! - [`pso`]: particle-swarm search for a 3×2 linear projection that keeps the
//!   MED of a 3D constellation when it is mapped onto the complex plane.
//! - [`sep`]: the Gaussian Q-function, exact-rational symbol error probability
//!   polynomials, curve utilities (SNR gain, absolute/relative error).
//! - [`sim`]: a seeded, partitioned AWGN Monte Carlo simulator with ML detection.
//! - [`io`]: the JSON/CSV file formats shared with the `hqam` command-line tool.
//! - [`cli`]: the `hqam` command-line tool itself.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod io;
pub mod pso;
pub mod sep;
pub mod sim;

pub use error::{Error, Result};
pub use geometry::{
    hqam_2d, hqam_3d, Constellation, NnHistogram, Point, SUPPORTED_ORDERS,
};
pub use pso::{PsoConfig, PsoTrace, ProjectionMatrix};
pub use sep::{SepCurve, SepMode, SepPolynomial, SnrPoint};
pub use sim::{SimConfig, SimReport};
