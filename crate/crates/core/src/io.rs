//! File formats shared by the library and the `hqam` tool.
//!
//! Data files are written atomically (temporary file in the target directory,
//! then rename), so a failed command never leaves a partial file behind. CSV
//! numbers use 17 significant digits, which round-trips every `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_rational::BigRational;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::Constellation;
use crate::pso::ProjectionMatrix;
use crate::sep::{parse_rational, CurvePoint, ErrorMetrics, SepCurve, SepMode, SepPolynomial, SnrPoint};

pub(crate) fn ser_rational<S: Serializer>(r: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&rational_string(r))
}

/// `n/d` in lowest terms, or just `n` for integers.
pub fn rational_string(r: &BigRational) -> String {
    if r.is_integer() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to `path` through a temporary sibling file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| Error::io(path, e))?;
    tmp.write_all(bytes).map_err(|e| Error::io(path, e))?;
    tmp.flush().map_err(|e| Error::io(path, e))?;
    tmp.persist(path).map_err(|e| Error::io(path, e.error))?;
    Ok(())
}

fn read_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(v)?;
    out.push(b'\n');
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstellationFile {
    pub order: usize,
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub avg_power: f64,
    pub med: f64,
}

impl From<&Constellation> for ConstellationFile {
    fn from(c: &Constellation) -> Self {
        Self {
            order: c.order(),
            dim: c.dim(),
            points: c.points().iter().map(|p| p.coords().to_vec()).collect(),
            avg_power: c.avg_power(),
            med: c.med(),
        }
    }
}

impl ConstellationFile {
    /// Rebuilds the constellation; `avg_power` and `med` are recomputed and
    /// the header fields must agree with the point list.
    pub fn into_constellation(self) -> Result<Constellation> {
        let c = Constellation::from_coords(&self.points)?;
        if c.order() != self.order || c.dim() != self.dim {
            return Err(Error::invalid(format!(
                "constellation header says {} points in {}D, file has {} in {}D",
                self.order,
                self.dim,
                c.order(),
                c.dim()
            )));
        }
        Ok(c)
    }
}

pub fn constellation_json(c: &Constellation) -> Result<Vec<u8>> {
    to_json(&ConstellationFile::from(c))
}

pub fn write_constellation(path: &Path, c: &Constellation) -> Result<()> {
    write_atomic(path, &constellation_json(c)?)
}

pub fn read_constellation(path: &Path) -> Result<Constellation> {
    let f: ConstellationFile = serde_json::from_str(&read_string(path)?)?;
    f.into_constellation()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionFile {
    pub matrix: ProjectionMatrix,
    pub target_med: f64,
    pub final_fitness: f64,
    pub seed: u64,
}

pub fn write_projection(path: &Path, p: &ProjectionFile) -> Result<()> {
    write_atomic(path, &to_json(p)?)
}

pub fn read_projection(path: &Path) -> Result<ProjectionFile> {
    let f: ProjectionFile = serde_json::from_str(&read_string(path)?)?;
    ProjectionMatrix::new(*f.matrix.entries())?;
    Ok(f)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SepPolynomialFile {
    #[serde(rename = "M")]
    pub order: usize,
    #[serde(rename = "A")]
    pub divisor: f64,
    pub b: Vec<String>,
    pub mode: SepMode,
}

impl From<&SepPolynomial> for SepPolynomialFile {
    fn from(p: &SepPolynomial) -> Self {
        Self {
            order: p.order(),
            divisor: p.divisor(),
            b: p.coeffs().iter().map(rational_string).collect(),
            mode: p.mode(),
        }
    }
}

impl SepPolynomialFile {
    pub fn into_polynomial(self) -> Result<SepPolynomial> {
        let coeffs = self
            .b
            .iter()
            .map(|s| parse_rational(s))
            .collect::<Result<Vec<_>>>()?;
        SepPolynomial::new(self.order, self.divisor, coeffs, self.mode)
    }
}

pub fn polynomial_json(p: &SepPolynomial) -> Result<Vec<u8>> {
    to_json(&SepPolynomialFile::from(p))
}

const CURVE_HEADER: [&str; 2] = ["esn0_db", "sep"];
const SIM_CURVE_HEADER: [&str; 6] = ["esn0_db", "sep", "ci_low", "ci_high", "symbols", "errors"];

/// Serializes a curve; the simulation columns are emitted when every sample
/// carries them.
pub fn curve_csv(curve: &SepCurve) -> Result<Vec<u8>> {
    let simulated = !curve.is_empty()
        && curve
            .points()
            .iter()
            .all(|p| p.ci.is_some() && p.symbols.is_some() && p.errors.is_some());
    let mut w = csv::Writer::from_writer(Vec::new());
    if simulated {
        w.write_record(SIM_CURVE_HEADER)?;
    } else {
        w.write_record(CURVE_HEADER)?;
    }
    for p in curve.points() {
        let mut row = vec![fmt_f64(p.esn0_db), fmt_f64(p.sep)];
        if simulated {
            let (lo, hi) = p.ci.expect("checked above");
            row.extend([
                fmt_f64(lo),
                fmt_f64(hi),
                p.symbols.expect("checked above").to_string(),
                p.errors.expect("checked above").to_string(),
            ]);
        }
        w.write_record(&row)?;
    }
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}

pub fn write_curve(path: &Path, curve: &SepCurve) -> Result<()> {
    write_atomic(path, &curve_csv(curve)?)
}

pub fn parse_curve_csv(label: &str, data: &[u8]) -> Result<SepCurve> {
    let mut r = csv::Reader::from_reader(data);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    let simulated = header == SIM_CURVE_HEADER;
    if !simulated && header != CURVE_HEADER {
        return Err(Error::invalid(format!(
            "unexpected curve header {header:?} in {label}"
        )));
    }
    let num = |s: &str| -> Result<f64> {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::invalid(format!("bad number {s:?} in {label}")))
    };
    let int = |s: &str| -> Result<u64> {
        s.trim()
            .parse::<u64>()
            .map_err(|_| Error::invalid(format!("bad count {s:?} in {label}")))
    };
    let mut pts = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut p = CurvePoint::analytic(num(&rec[0])?, num(&rec[1])?);
        if simulated {
            p.ci = Some((num(&rec[2])?, num(&rec[3])?));
            p.symbols = Some(int(&rec[4])?);
            p.errors = Some(int(&rec[5])?);
        }
        pts.push(p);
    }
    SepCurve::new(label, pts)
}

pub fn read_curve(path: &Path) -> Result<SepCurve> {
    let data = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_curve_csv(&path.display().to_string(), &data)
}

/// `esn0_db,ae,re` rows; a blank `re` marks a zero reference.
pub fn errors_csv(rows: &[(f64, ErrorMetrics)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["esn0_db", "ae", "re"])?;
    for (db, m) in rows {
        w.write_record([fmt_f64(*db), fmt_f64(m.ae), m.re.map(fmt_f64).unwrap_or_default()])?;
    }
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainRow {
    #[serde(rename = "M")]
    pub order: usize,
    pub gain_db: f64,
    pub med_2d: f64,
    pub med_3d: f64,
    pub med_increase_pct: f64,
}

/// `M,gain_db,med_2d,med_3d,med_increase_pct` rows.
pub fn compare_csv(rows: &[GainRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["M", "gain_db", "med_2d", "med_3d", "med_increase_pct"])?;
    for r in rows {
        w.write_record([
            r.order.to_string(),
            fmt_f64(r.gain_db),
            fmt_f64(r.med_2d),
            fmt_f64(r.med_3d),
            fmt_f64(r.med_increase_pct),
        ])?;
    }
    w.into_inner().map_err(|e| Error::invalid(e.to_string()))
}

pub fn to_json_bytes<T: Serialize>(v: &T) -> Result<Vec<u8>> {
    to_json(v)
}

/// Parses `start:stop:step` (dB, inclusive of `stop` within 1e-9 steps).
pub fn parse_snr_range(spec: &str) -> Result<Vec<SnrPoint>> {
    let bad = || Error::invalid(format!("SNR range must be start:stop:step, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad());
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|s| s.trim().parse::<f64>().map_err(|_| bad()))
        .collect::<Result<_>>()?;
    let (start, stop, step) = (v[0], v[1], v[2]);
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) {
        return Err(bad());
    }
    if !(step > 0.0) {
        return Err(Error::invalid(format!("SNR step must be positive, got {step}")));
    }
    if !(start < stop) {
        return Err(Error::invalid(format!(
            "SNR start must be below stop, got {start}:{stop}"
        )));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize + 1;
    (0..n)
        .map(|k| SnrPoint::from_db(start + k as f64 * step))
        .collect()
}
