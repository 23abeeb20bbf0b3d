//! Measurement ingestion, validation, reference normalization, synthetic
//! dataset generation, and content hashing.
//!
//! A dataset is a set of gain records anchored to a designated reference
//! point whose gain is 1 (0 dB). CSV files carry columns
//! `x_m, y_m, z_m, delta_h_db` (or `delta_h_linear`); `#` lines are comments.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::geometry::{GridPoint, LampPose};
use crate::models::{DbConvention, PointModel};

/// Positive-gain tolerance for the reference record: |ΔH − 1| ≤ this.
const REFERENCE_GAIN_TOL: f64 = 1e-6;
/// dB/linear consistency tolerance for records carrying both fields.
const DB_CONSISTENCY_TOL: f64 = 1e-9;

/// One measured (or synthesized) channel gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementRecord {
    pub point: GridPoint,
    /// Linear dimensionless gain, > 0.
    pub delta_h: f64,
    /// Optional dB form; must equal 10·log₁₀(delta_h) within 1e−9 when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_h_db: Option<f64>,
    /// Optional free-form provenance note.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<String>,
}

impl MeasurementRecord {
    pub fn new(point: GridPoint, delta_h: f64) -> Self {
        MeasurementRecord { point, delta_h, delta_h_db: None, tag: None }
    }

    fn validate(&self) -> Result<()> {
        let p = &self.point;
        if ![p.x, p.y, p.z, self.delta_h].iter().all(|v| v.is_finite()) {
            return Err(Error::Data(format!(
                "non-finite record at ({}, {}, {})",
                p.x, p.y, p.z
            )));
        }
        if !(self.delta_h > 0.0) {
            return Err(Error::Data(format!(
                "nonpositive gain {} at ({}, {}, {})",
                self.delta_h, p.x, p.y, p.z
            )));
        }
        if let Some(db) = self.delta_h_db {
            let expected = DbConvention::Intensity.to_db(self.delta_h);
            if !db.is_finite() || (db - expected).abs() > DB_CONSISTENCY_TOL {
                return Err(Error::Data(format!(
                    "inconsistent record at ({}, {}, {}): {db} dB vs linear {} ({expected} dB)",
                    p.x, p.y, p.z, self.delta_h
                )));
            }
        }
        Ok(())
    }
}

/// A validated, reference-anchored gain dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    records: Vec<MeasurementRecord>,
    lamp: LampPose,
    reference: GridPoint,
    hash: String,
}

impl Dataset {
    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn lamp(&self) -> &LampPose {
        &self.lamp
    }

    pub fn reference(&self) -> &GridPoint {
        &self.reference
    }

    /// SHA-256 of the canonicalized content (order-independent).
    pub fn hash(&self) -> &str {
        &self.hash
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Writes the CSV form. When every record carries a dB value the file
    /// uses the `delta_h_db` column (preserving those values exactly);
    /// otherwise it uses `delta_h_linear`. Tags are not part of the CSV
    /// schema; use the JSON form to keep them.
    pub fn export_csv<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.export_csv_to(&mut out)?;
        out.flush()?;
        Ok(())
    }

    /// CSV form onto an open writer, so callers can prepend comment headers.
    pub fn export_csv_to<W: Write>(&self, mut out: W) -> Result<()> {
        let all_db = self.records.iter().all(|r| r.delta_h_db.is_some());
        if all_db {
            writeln!(out, "x_m,y_m,z_m,delta_h_db")?;
            for r in &self.records {
                let p = &r.point;
                writeln!(out, "{:?},{:?},{:?},{:?}", p.x, p.y, p.z, r.delta_h_db.unwrap())?;
            }
        } else {
            writeln!(out, "x_m,y_m,z_m,delta_h_linear")?;
            for r in &self.records {
                let p = &r.point;
                writeln!(out, "{:?},{:?},{:?},{:?}", p.x, p.y, p.z, r.delta_h)?;
            }
        }
        Ok(())
    }

    /// Writes the JSON form: records (with tags), lamp pose, reference, hash.
    pub fn save_json<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        let text = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Data(format!("dataset serialization: {e}")))?;
        std::fs::write(path, text + "\n")?;
        Ok(())
    }

    /// Loads the JSON form, re-validating every invariant and checking the
    /// stored content hash.
    pub fn load_json<P: AsRef<Path>>(path: P) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let raw: Dataset = serde_json::from_str(&text)
            .map_err(|e| Error::Data(format!("dataset file {}: {e}", path.display())))?;
        let rebuilt = from_records(raw.records, raw.lamp, raw.reference)?;
        if rebuilt.hash != raw.hash {
            return Err(Error::Data(format!(
                "dataset file {}: stored hash {} does not match content hash {}",
                path.display(),
                raw.hash,
                rebuilt.hash
            )));
        }
        Ok(rebuilt)
    }
}

/// Canonical content hash: records sorted by position, each field rendered
/// in shortest-roundtrip form, followed by the lamp pose and reference.
fn content_hash(
    records: &[MeasurementRecord],
    lamp: &LampPose,
    reference: &GridPoint,
) -> String {
    let mut sorted: Vec<&MeasurementRecord> = records.iter().collect();
    sorted.sort_by(|a, b| {
        (a.point.x, a.point.y, a.point.z)
            .partial_cmp(&(b.point.x, b.point.y, b.point.z))
            .expect("validated records have ordered coordinates")
    });
    let mut hasher = Sha256::new();
    for r in sorted {
        let line = format!(
            "{:?} {:?} {:?} {:?} {:?} {:?}\n",
            r.point.x, r.point.y, r.point.z, r.delta_h, r.delta_h_db, r.tag
        );
        hasher.update(line.as_bytes());
    }
    hasher.update(
        format!(
            "lamp {:?} {:?} {:?} {:?}\nreference {:?} {:?} {:?}\n",
            lamp.height, lamp.aim.x, lamp.aim.y, lamp.aim.z, reference.x, reference.y, reference.z
        )
        .as_bytes(),
    );
    hex::encode(hasher.finalize())
}

/// Builds a dataset from records, enforcing every invariant: finite fields,
/// positive gains, dB/linear consistency, no duplicate positions, and a
/// reference record with gain 1 within 1e−6.
pub fn from_records(
    records: Vec<MeasurementRecord>,
    lamp: LampPose,
    reference: GridPoint,
) -> Result<Dataset> {
    if records.is_empty() {
        return Err(Error::Data("dataset has no records".into()));
    }
    for r in &records {
        r.validate()?;
    }
    let mut seen: Vec<(f64, f64, f64)> = Vec::with_capacity(records.len());
    for r in &records {
        let key = (r.point.x, r.point.y, r.point.z);
        if seen.contains(&key) {
            return Err(Error::Data(format!(
                "duplicate position ({}, {}, {})",
                key.0, key.1, key.2
            )));
        }
        seen.push(key);
    }
    let anchor = records
        .iter()
        .find(|r| r.point.x == reference.x && r.point.y == reference.y && r.point.z == reference.z)
        .ok_or_else(|| {
            Error::Data(format!(
                "reference point ({}, {}, {}) has no record",
                reference.x, reference.y, reference.z
            ))
        })?;
    if (anchor.delta_h - 1.0).abs() > REFERENCE_GAIN_TOL {
        return Err(Error::Data(format!(
            "reference record gain {} is not 1 within {REFERENCE_GAIN_TOL}",
            anchor.delta_h
        )));
    }
    let hash = content_hash(&records, &lamp, &reference);
    Ok(Dataset { records, lamp, reference, hash })
}

/// Reads a gain CSV. The header must be `x_m, y_m, z_m` plus either
/// `delta_h_db` or `delta_h_linear`; `#` lines are skipped; dB values convert
/// through the 10·log₁₀ intensity convention.
pub fn ingest<P: AsRef<Path>>(path: P, lamp: LampPose, reference: GridPoint) -> Result<Dataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;

    let headers = reader
        .headers()
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?
        .clone();
    let cols: Vec<&str> = headers.iter().collect();
    let db_gain = match cols.as_slice() {
        ["x_m", "y_m", "z_m", "delta_h_db"] => true,
        ["x_m", "y_m", "z_m", "delta_h_linear"] => false,
        _ => {
            return Err(Error::Data(format!(
                "{}: header must be x_m, y_m, z_m, delta_h_db|delta_h_linear; got {}",
                path.display(),
                cols.join(", ")
            )));
        }
    };

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        if row.len() != 4 {
            return Err(Error::Data(format!(
                "{} line {line}: expected 4 fields, got {}",
                path.display(),
                row.len()
            )));
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| {
                Error::Data(format!(
                    "{} line {line}: {name} value {:?} is not a number",
                    path.display(),
                    &row[i]
                ))
            })
        };
        let x = field(0, "x_m")?;
        let y = field(1, "y_m")?;
        let z = field(2, "z_m")?;
        let gain = field(3, if db_gain { "delta_h_db" } else { "delta_h_linear" })?;
        let record = if db_gain {
            MeasurementRecord {
                point: GridPoint::new(x, y, z),
                delta_h: DbConvention::Intensity.from_db(gain),
                delta_h_db: Some(gain),
                tag: None,
            }
        } else {
            if !(gain > 0.0) {
                return Err(Error::Data(format!(
                    "{} line {line}: nonpositive linear gain {gain}",
                    path.display()
                )));
            }
            MeasurementRecord::new(GridPoint::new(x, y, z), gain)
        };
        record
            .validate()
            .map_err(|e| Error::Data(format!("{} line {line}: {e}", path.display())))?;
        records.push(record);
    }
    from_records(records, lamp, reference)
}

/// The standard 162-point measurement grid: x ∈ {3, 4, 5, 7, 10, 15, 20, 25,
/// 30} (denser over the first 10 m), y ∈ {0.75 … 5.75} in 1 m steps,
/// z ∈ {0.75, 1, 1.35} m, in x-major canonical order.
pub fn measurement_grid() -> Vec<GridPoint> {
    let xs = [3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 20.0, 25.0, 30.0];
    let ys = [0.75, 1.75, 2.75, 3.75, 4.75, 5.75];
    let zs = [0.75, 1.0, 1.35];
    let mut grid = Vec::with_capacity(xs.len() * ys.len() * zs.len());
    for x in xs {
        for y in ys {
            for z in zs {
                grid.push(GridPoint::new(x, y, z));
            }
        }
    }
    grid
}

/// A finer synthesis grid over the same volume: 1 m steps in x, 0.5 m steps
/// in y, the three receiver heights — 924 points including the reference.
pub fn dense_grid() -> Vec<GridPoint> {
    let zs = [0.75, 1.0, 1.35];
    let mut grid = Vec::with_capacity(28 * 11 * 3);
    for ix in 0..28 {
        for iy in 0..11 {
            for z in zs {
                grid.push(GridPoint::new(3.0 + ix as f64, 0.75 + 0.5 * iy as f64, z));
            }
        }
    }
    grid
}

/// Generates a dataset from a model: ΔH = prediction × (1 + ε) with
/// ε ~ Normal(0, noise_percent/100), truncated to keep gains positive, then
/// renormalized so the reference point reads exactly 1. The reference must be
/// one of `points`; a model failure names the offending point.
pub fn synthesize(
    model: &dyn PointModel,
    points: &[GridPoint],
    lamp: LampPose,
    reference: GridPoint,
    noise_percent: f64,
    seed: u64,
) -> Result<Dataset> {
    if points.is_empty() {
        return Err(Error::Data("no points to synthesize".into()));
    }
    if !(noise_percent >= 0.0) || !noise_percent.is_finite() {
        return Err(Error::Domain(format!(
            "noise percent {noise_percent} must be nonnegative"
        )));
    }
    let ref_idx = points
        .iter()
        .position(|p| p.x == reference.x && p.y == reference.y && p.z == reference.z)
        .ok_or_else(|| {
            Error::Data(format!(
                "reference point ({}, {}, {}) is not among the synthesis points",
                reference.x, reference.y, reference.z
            ))
        })?;

    let mut gains = Vec::with_capacity(points.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = if noise_percent > 0.0 {
        Some(
            Normal::new(0.0, noise_percent / 100.0)
                .map_err(|e| Error::Domain(format!("noise distribution: {e}")))?,
        )
    } else {
        None
    };
    for p in points {
        let predicted = model.eval(p, &lamp).map_err(|e| {
            Error::Numerical(format!(
                "model failed at ({}, {}, {}): {e}",
                p.x, p.y, p.z
            ))
        })?;
        if !(predicted > 0.0) || !predicted.is_finite() {
            return Err(Error::Numerical(format!(
                "model gain {predicted} at ({}, {}, {}) cannot seed a positive record",
                p.x, p.y, p.z
            )));
        }
        let noisy = match &noise {
            // Truncate so a deep noise excursion cannot cross zero.
            Some(n) => (predicted * (1.0 + n.sample(&mut rng))).max(predicted * 1e-6),
            None => predicted,
        };
        gains.push(noisy);
    }
    let anchor = gains[ref_idx];
    let records: Vec<MeasurementRecord> = points
        .iter()
        .zip(&gains)
        .map(|(p, g)| MeasurementRecord::new(*p, g / anchor))
        .collect();
    from_records(records, lamp, reference)
}

// ---------------------------------------------------------------------------
