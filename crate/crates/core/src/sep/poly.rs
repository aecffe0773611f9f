use std::str::FromStr;

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{a_from_med, q_function, SnrPoint};
use crate::error::{Error, Result};
use crate::geometry::{nn_histogram, Constellation, NnHistogram};

/// Where the divisor and coefficients of a [`SepPolynomial`] come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SepMode {
    /// Published table row.
    Paper,
    /// Computed from an actual constellation (histogram + MED).
    Derived,
}

impl SepMode {
    pub fn name(self) -> &'static str {
        match self {
            SepMode::Paper => "paper",
            SepMode::Derived => "derived",
        }
    }
}

impl FromStr for SepMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(SepMode::Paper),
            "derived" => Ok(SepMode::Derived),
            other => Err(Error::invalid(format!(
                "unknown mode {other:?} (expected paper|derived)"
            ))),
        }
    }
}

/// `Pe(γ) = Σₙ (−1)ⁿ⁺¹ bₙ Qⁿ(√(γ/A))`.
#[derive(Debug, Clone, PartialEq)]
pub struct SepPolynomial {
    order: usize,
    divisor: f64,
    coeffs: Vec<BigRational>,
    mode: SepMode,
}

impl SepPolynomial {
    pub fn new(order: usize, divisor: f64, coeffs: Vec<BigRational>, mode: SepMode) -> Result<Self> {
        if !(divisor.is_finite() && divisor > 0.0) {
            return Err(Error::invalid(format!("divisor A must be positive, got {divisor}")));
        }
        if coeffs.first().is_none_or(|b| !b.is_positive()) {
            return Err(Error::invalid("leading coefficient b1 must be positive"));
        }
        Ok(Self {
            order,
            divisor,
            coeffs,
            mode,
        })
    }

    /// Derived-mode polynomial of a constellation: neighbour histogram at
    /// `rel_tol` for the coefficients, unit-power MED for the divisor.
    pub fn derived(c: &Constellation, rel_tol: f64) -> Result<Self> {
        let hist = nn_histogram(c, rel_tol)?;
        let coeffs = coeffs_from_histogram(&hist)?;
        Self::new(c.order(), a_from_med(c.unit_power_med())?, coeffs, SepMode::Derived)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn divisor(&self) -> f64 {
        self.divisor
    }

    pub fn coeffs(&self) -> &[BigRational] {
        &self.coeffs
    }

    pub fn mode(&self) -> SepMode {
        self.mode
    }

    /// `Σₙ (−1)ⁿ⁺¹ bₙ`, i.e. `Pe` at `Q = 1`.
    ///
    /// Equals 1 whenever every point has at least one neighbour; in general it
    /// is the fraction of points with `K(i) ≥ 1`.
    pub fn alternating_sum(&self) -> BigRational {
        self.coeffs
            .iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (i, b)| {
                if i % 2 == 0 {
                    acc + b
                } else {
                    acc - b
                }
            })
    }

    pub fn satisfies_unit_sum(&self) -> bool {
        self.alternating_sum() == BigRational::one()
    }

    /// Exact value of the polynomial at a rational `q`.
    pub fn eval_exact(&self, q: &BigRational) -> BigRational {
        let mut acc = BigRational::zero();
        for (i, b) in self.coeffs.iter().enumerate().rev() {
            let signed = if i % 2 == 0 { b.clone() } else { -b.clone() };
            acc = acc * q + signed;
        }
        acc * q
    }

    /// Polynomial value at a floating `q = Q(·)`, without range checks.
    pub fn eval_q(&self, q: f64) -> f64 {
        let mut acc = 0.0;
        for (i, b) in self.coeffs.iter().enumerate().rev() {
            let b = b.to_f64().unwrap_or(f64::NAN);
            acc = acc * q + if i % 2 == 0 { b } else { -b };
        }
        acc * q
    }
}

/// Expands `Pe(q) = 1 − (1/M) Σᵢ (1 − q)^K(i)` into `Σₙ (−1)ⁿ⁺¹ bₙ qⁿ`.
///
/// `bₙ = (1/M) Σᵢ C(K(i), n)`. At least six coefficients are returned (trailing
/// zeros kept); more when some `K(i)` exceeds 6.
pub fn coeffs_from_histogram(hist: &NnHistogram) -> Result<Vec<BigRational>> {
    let m = hist.order();
    if m == 0 {
        return Err(Error::invalid("empty neighbour histogram"));
    }
    let degree = (hist.max_k() as usize).max(6);
    let denom = BigInt::from(m);
    Ok((1..=degree)
        .map(|n| {
            let n = BigInt::from(n);
            let num: BigInt = hist
                .per_point
                .iter()
                .map(|&k| {
                    let k = BigInt::from(k);
                    if k < n {
                        BigInt::zero()
                    } else {
                        binomial(k, n.clone())
                    }
                })
                .sum();
            BigRational::new(num, denom.clone())
        })
        .collect())
}

/// Orders that have a published table row.
pub const TABLE2_ORDERS: [usize; 7] = [16, 32, 64, 128, 256, 512, 1024];

const TABLE2: [(usize, f64, [&str; 6]); 7] = [
    (16, 2.24, ["33/8", "59/8", "121/16", "19/4", "27/16", "1/4"]),
    (32, 4.02, ["75/16", "305/32", "349/32", "237/32", "89/32", "7/16"]),
    (64, 6.32, ["161/32", "349/32", "209/16", "291/32", "111/32", "9/16"]),
    (128, 10.18, ["43/8", "393/32", "979/64", "1403/128", "137/32", "91/128"]),
    (256, 16.26, ["711/128", "3345/256", "4265/256", "3105/256", "1221/256", "101/128"]),
    (512, 26.54, ["1455/256", "6977/512", "9025/512", "6633/512", "2621/512", "217/256"]),
    (1024, 41.14, ["5913/1024", "14361/1024", "18757/1024", "13875/1024", "2751/512", "57/64"]),
];

/// A table entry whose printed value contradicts `Σ (−1)ⁿ⁺¹ bₙ = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableErratum {
    pub order: usize,
    /// 1-based coefficient index.
    pub index: usize,
    pub printed: &'static str,
    pub corrected: &'static str,
}

/// Corrections applied to the embedded table. The corrected value is the
/// unique one that restores the alternating-sum identity.
pub const TABLE2_ERRATA: [TableErratum; 1] = [TableErratum {
    order: 64,
    index: 5,
    printed: "93/32",
    corrected: "111/32",
}];

pub(crate) fn parse_rational(s: &str) -> Result<BigRational> {
    let bad = || Error::invalid(format!("malformed rational {s:?}"));
    let (n, d) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (s.trim(), "1"),
    };
    let n = BigInt::from_str(n).map_err(|_| bad())?;
    let d = BigInt::from_str(d).map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

/// Published divisor and coefficients for order `m`.
pub fn table2_params(m: usize) -> Result<SepPolynomial> {
    let (_, a, row) = TABLE2
        .iter()
        .find(|(order, _, _)| *order == m)
        .ok_or(Error::NotInTable(m))?;
    let coeffs = row
        .iter()
        .map(|s| parse_rational(s))
        .collect::<Result<Vec<_>>>()?;
    SepPolynomial::new(m, *a, coeffs, SepMode::Paper)
}

const RANGE_SLACK: f64 = 1e-12;

/// Evaluates `Σₙ (−1)ⁿ⁺¹ bₙ Qⁿ(√(γ/A))`.
///
/// Values within 1e-12 outside `[0, 1]` are clamped; anything further out means
/// the coefficients are inconsistent.
pub fn sep_eval(poly: &SepPolynomial, snr: SnrPoint) -> Result<f64> {
    if !(snr.gamma >= 0.0) {
        return Err(Error::invalid(format!("SNR must be non-negative, got {}", snr.gamma)));
    }
    let q = q_function((snr.gamma / poly.divisor).sqrt());
    let pe = poly.eval_q(q);
    if !(-RANGE_SLACK..=1.0 + RANGE_SLACK).contains(&pe) {
        return Err(Error::InternalConsistency(format!(
            "SEP {pe} outside [0, 1] at γ = {} for order {}",
            snr.gamma, poly.order
        )));
    }
    Ok(pe.clamp(0.0, 1.0))
}
