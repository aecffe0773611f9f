use serde::{Deserialize, Serialize};

use super::{sep_eval, SepPolynomial, SnrPoint};
use crate::error::{Error, Result};

/// One sample of an SEP curve. Simulated samples carry a confidence interval
/// and the counts they were estimated from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub esn0_db: f64,
    pub sep: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub symbols: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub errors: Option<u64>,
}

impl CurvePoint {
    pub fn analytic(esn0_db: f64, sep: f64) -> Self {
        Self {
            esn0_db,
            sep,
            ci: None,
            symbols: None,
            errors: None,
        }
    }
}

/// SEP samples over a strictly increasing dB grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepCurve {
    pub label: String,
    points: Vec<CurvePoint>,
}

impl SepCurve {
    pub fn new(label: impl Into<String>, points: Vec<CurvePoint>) -> Result<Self> {
        for w in points.windows(2) {
            if !(w[1].esn0_db > w[0].esn0_db) {
                return Err(Error::invalid(format!(
                    "SNR grid must be strictly increasing ({} dB then {} dB)",
                    w[0].esn0_db, w[1].esn0_db
                )));
            }
        }
        if let Some(p) = points.iter().find(|p| !(0.0..=1.0).contains(&p.sep)) {
            return Err(Error::invalid(format!(
                "SEP {} at {} dB is outside [0, 1]",
                p.sep, p.esn0_db
            )));
        }
        Ok(Self {
            label: label.into(),
            points,
        })
    }

    /// Evaluates a closed-form polynomial on the given grid.
    pub fn analytic(label: impl Into<String>, poly: &SepPolynomial, grid: &[SnrPoint]) -> Result<Self> {
        let points = grid
            .iter()
            .map(|&s| Ok(CurvePoint::analytic(s.esn0_db, sep_eval(poly, s)?)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(label, points)
    }

    pub fn points(&self) -> &[CurvePoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn grid_db(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.esn0_db).collect()
    }

    /// Es/N0 in dB at which the curve crosses `target`, interpolating linearly
    /// in (dB, log10 SEP) between the first bracketing pair of samples.
    pub fn crossing_db(&self, target: f64) -> Result<f64> {
        if !(target > 0.0 && target < 1.0) {
            return Err(Error::invalid(format!("target SEP must lie in (0, 1), got {target}")));
        }
        for w in self.points.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            if a.sep == target {
                return Ok(a.esn0_db);
            }
            if a.sep > target && b.sep <= target {
                if b.sep == target {
                    return Ok(b.esn0_db);
                }
                if b.sep == 0.0 {
                    break;
                }
                let (la, lb, lt) = (a.sep.log10(), b.sep.log10(), target.log10());
                return Ok(a.esn0_db + (lt - la) / (lb - la) * (b.esn0_db - a.esn0_db));
            }
        }
        Err(Error::OutOfRange(format!(
            "curve {:?} does not bracket SEP {target:e}",
            self.label
        )))
    }
}

/// SNR gain of `curve_a` over `curve_b` at `target_sep`: the dB value at which
/// `curve_b` reaches the target minus the one for `curve_a`.
pub fn snr_gain_at(target_sep: f64, curve_a: &SepCurve, curve_b: &SepCurve) -> Result<f64> {
    Ok(curve_b.crossing_db(target_sep)? - curve_a.crossing_db(target_sep)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{hqam_2d, hqam_3d, LATTICE_NN_TOL};
    use crate::sep::table2_params;

    fn grid(start: f64, stop: f64, step: f64) -> Vec<SnrPoint> {
        let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
        (0..n)
            .map(|k| SnrPoint::from_db(start + k as f64 * step).unwrap())
            .collect()
    }

    fn pts(v: &[(f64, f64)]) -> Vec<CurvePoint> {
        v.iter().map(|&(d, s)| CurvePoint::analytic(d, s)).collect()
    }

    #[test]
    fn validation() {
        assert!(SepCurve::new("x", pts(&[(1.0, 0.1), (1.0, 0.05)])).is_err());
        assert!(SepCurve::new("x", pts(&[(1.0, 1.1)])).is_err());
        assert!(SepCurve::new("x", vec![]).unwrap().is_empty());
    }

    #[test]
    fn log_linear_interpolation() {
        let c = SepCurve::new("x", pts(&[(10.0, 1e-4), (12.0, 1e-6)])).unwrap();
        assert!((c.crossing_db(1e-5).unwrap() - 11.0).abs() < 1e-12);
        assert!(matches!(c.crossing_db(1e-7), Err(Error::OutOfRange(_))));
        assert!(matches!(c.crossing_db(1e-3), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn identical_curves_have_zero_gain() {
        let p = table2_params(16).unwrap();
        let c = SepCurve::analytic("a", &p, &grid(0.0, 30.0, 0.5)).unwrap();
        assert_eq!(snr_gain_at(1e-5, &c, &c).unwrap(), 0.0);
    }

    #[test]
    fn gain_tracks_med_ratio() {
        let g = grid(0.0, 45.0, 0.05);
        for m in [16, 64, 256] {
            let c3 = hqam_3d(m).unwrap();
            let c2 = hqam_2d(m).unwrap();
            let a = SepCurve::analytic("3d", &SepPolynomial::derived(&c3, LATTICE_NN_TOL).unwrap(), &g).unwrap();
            let b = SepCurve::analytic("2d", &SepPolynomial::derived(&c2, LATTICE_NN_TOL).unwrap(), &g).unwrap();
            let gain = snr_gain_at(1e-5, &a, &b).unwrap();
            let approx = 20.0 * (c3.med() / c2.med()).log10();
            assert!((gain - approx).abs() < 0.5, "M={m}: {gain} vs {approx}");
        }
    }
}
