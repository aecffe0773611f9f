//! Symbol error probability: the Gaussian tail function, closed-form SEP
//! polynomials with exact rational coefficients, and curve comparison helpers.

mod curve;
mod poly;

pub use curve::{snr_gain_at, CurvePoint, SepCurve};
pub use poly::{
    coeffs_from_histogram, sep_eval, table2_params, SepMode, SepPolynomial, TableErratum,
    TABLE2_ERRATA, TABLE2_ORDERS,
};
pub(crate) use poly::parse_rational;

use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Gaussian tail probability `Q(z) = P(Z > z)` for a standard normal `Z`.
///
/// Evaluated as `erfc(z / √2) / 2`; `libm`'s `erfc` is a port of the FreeBSD
/// msun rational approximations (error below 1 ulp on the reduced range), which
/// keeps the absolute error of `Q` far below 1e-12 for every finite `z`.
pub fn q_function(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// An SNR sample, kept both in decibels and as the linear ratio `γ = Es/N0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SnrPoint {
    pub esn0_db: f64,
    pub gamma: f64,
}

impl SnrPoint {
    pub fn from_db(esn0_db: f64) -> Result<Self> {
        if !esn0_db.is_finite() {
            return Err(Error::invalid(format!("SNR must be finite, got {esn0_db} dB")));
        }
        Ok(Self {
            esn0_db,
            gamma: 10f64.powf(esn0_db / 10.0),
        })
    }

    /// `γ = 0` is accepted and maps to `-inf` dB.
    pub fn from_linear(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid(format!("SNR must be non-negative, got {gamma}")));
        }
        Ok(Self {
            esn0_db: 10.0 * gamma.log10(),
            gamma,
        })
    }
}

/// Nearest-neighbour approximation `K̄ · Q(δ √(γ/2))`, with `δ` the MED of the
/// constellation at unit average power.
pub fn sep_nn_approx(mean_k: &BigRational, med_unit_power: f64, snr: SnrPoint) -> Result<f64> {
    if *mean_k < BigRational::one() {
        return Err(Error::invalid("mean neighbour count must be at least 1"));
    }
    if !(med_unit_power.is_finite() && med_unit_power > 0.0) {
        return Err(Error::invalid("MED must be positive"));
    }
    if !(snr.gamma >= 0.0) {
        return Err(Error::invalid("SNR must be non-negative"));
    }
    let k = mean_k.to_f64().unwrap_or(f64::NAN);
    Ok(k * q_function(med_unit_power * (snr.gamma / 2.0).sqrt()))
}

/// SNR divisor `A = 2/δ²`, chosen so that `√(γ/A) = δ √(γ/2)`.
pub fn a_from_med(med_unit_power: f64) -> Result<f64> {
    if !(med_unit_power.is_finite() && med_unit_power > 0.0) {
        return Err(Error::invalid(format!("MED must be positive, got {med_unit_power}")));
    }
    Ok(2.0 / (med_unit_power * med_unit_power))
}

/// Absolute and relative error of an estimate against a reference SEP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    pub ae: f64,
    /// `None` when the reference is zero.
    pub re: Option<f64>,
}

impl ErrorMetrics {
    pub fn re(&self) -> Result<f64> {
        self.re.ok_or(Error::RelativeErrorUndefined)
    }
}

/// `AE = |p − p_exact|` and `RE = AE / p_exact`.
pub fn abs_rel_error(p: f64, p_exact: f64) -> Result<ErrorMetrics> {
    for (name, v) in [("p", p), ("p_exact", p_exact)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::invalid(format!("{name} must lie in [0, 1], got {v}")));
        }
    }
    let ae = (p - p_exact).abs();
    let re = (p_exact > 0.0).then(|| ae / p_exact);
    Ok(ErrorMetrics { ae, re })
}
