//! Link-performance analysis: noise estimation from repeated periods,
//! signal-to-noise ratio, bit-error rate, BER coverage maps, and the
//! field-of-view reflection-exclusion geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{GridPoint, LampPose};
use crate::models::{PointModel, Region};
use crate::signal::Waveform;

/// Default detector width, meters.
pub const DEFAULT_DETECTOR_WIDTH_M: f64 = 0.006;
/// Default lens focal length, meters.
pub const DEFAULT_FOCAL_LENGTH_M: f64 = 0.030;
/// Bins used for the noise-residual histogram.
const NOISE_HISTOGRAM_BINS: usize = 30;

/// Residual histogram for diagnostics: `edges` has one more entry than
/// `counts`; the last bin includes its upper edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<usize>,
}

/// Pooled noise statistics extracted from repeated signal periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseEstimate {
    /// Pooled sample variance (n − 1 denominator), volts².
    pub variance: f64,
    /// Mean residual, volts; near zero for a well-modeled gain.
    pub mean: f64,
    pub sample_count: usize,
    pub histogram: Histogram,
}

/// Estimates noise by differencing repeated periods against the scaled mean
/// reference period: w_ij = s_ij − s̄_ref,j·ΔH. Residuals are pooled across
/// periods and summarized by their sample variance and a histogram.
pub fn estimate_noise(
    periods: &[Waveform],
    ref_mean: &Waveform,
    delta_h: f64,
) -> Result<NoiseEstimate> {
    if periods.is_empty() || ref_mean.is_empty() {
        return Err(Error::Data("noise estimation needs at least one period and a reference".into()));
    }
    if !(delta_h > 0.0) || !delta_h.is_finite() {
        return Err(Error::Domain(format!("gain {delta_h} must be positive")));
    }
    let len = ref_mean.len();
    for (i, p) in periods.iter().enumerate() {
        if p.len() != len {
            return Err(Error::Data(format!(
                "period {i} has {} samples, reference has {len}",
                p.len()
            )));
        }
        if (p.sample_rate - ref_mean.sample_rate).abs() > 1e-9 * ref_mean.sample_rate {
            return Err(Error::Data(format!(
                "period {i} sampled at {} Hz, reference at {} Hz",
                p.sample_rate, ref_mean.sample_rate
            )));
        }
    }
    let n = periods.len() * len;
    if n < 2 {
        return Err(Error::Data("pooled variance needs at least two samples".into()));
    }
    let mut residuals = Vec::with_capacity(n);
    for p in periods {
        for (s, r) in p.samples.iter().zip(&ref_mean.samples) {
            residuals.push(s - r * delta_h);
        }
    }
    let mean = residuals.iter().sum::<f64>() / n as f64;
    let variance = residuals.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (n - 1) as f64;

    let lo = residuals.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = residuals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let histogram = if hi > lo {
        let bins = NOISE_HISTOGRAM_BINS;
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0usize; bins];
        for w in &residuals {
            let k = (((w - lo) / width) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let edges = (0..=bins).map(|k| lo + k as f64 * width).collect();
        Histogram { edges, counts }
    } else {
        // All residuals identical: one unit-width bin around the value.
        Histogram { edges: vec![lo - 0.5, lo + 0.5], counts: vec![n] }
    };
    Ok(NoiseEstimate { variance, mean, sample_count: n, histogram })
}

/// Signal-to-noise ratio E[s̄²_ref]·ΔH²/σ². Zero variance yields the
/// infinite-SNR flag (`f64::INFINITY`) rather than an error.
pub fn snr(ref_mean: &Waveform, delta_h: f64, noise_variance: f64) -> Result<f64> {
    if ref_mean.is_empty() {
        return Err(Error::Data("empty reference waveform".into()));
    }
    if !(delta_h > 0.0) || !delta_h.is_finite() {
        return Err(Error::Domain(format!("gain {delta_h} must be positive")));
    }
    if noise_variance < 0.0 || !noise_variance.is_finite() {
        return Err(Error::Domain(format!(
            "noise variance {noise_variance} must be nonnegative"
        )));
    }
    let mean_sq =
        ref_mean.samples.iter().map(|s| s * s).sum::<f64>() / ref_mean.len() as f64;
    if noise_variance == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(mean_sq * delta_h * delta_h / noise_variance)
}

/// Gaussian tail probability Q(x) = ½·erfc(x/√2).
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / std::f64::consts::SQRT_2)
}

/// Bit-error probability of antipodal signaling over AWGN: P_e = Q(√SNR).
pub fn ber(snr: f64) -> Result<f64> {
    if snr < 0.0 || snr.is_nan() {
        return Err(Error::Domain(format!("snr {snr} must be nonnegative")));
    }
    Ok(q_function(snr.sqrt()))
}

/// One BER-map cell; `None` entries mark points where the model is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct BerCell {
    pub x: f64,
    pub y: f64,
    pub snr_db: Option<f64>,
    pub ber: Option<f64>,
}

/// Error-probability map at one receiver height.
#[derive(Debug, Clone, PartialEq)]
pub struct BerMap {
    pub region: Region,
    pub height: f64,
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    /// Flattened `ny`×`nx`, indexed `iy * nx + ix`.
    pub cells: Vec<BerCell>,
    pub undefined_cells: usize,
}

/// Maps P_e over a region at one height: per cell, the model's gain feeds the
/// SNR expression (reference mean-square power `ref_power`, ΔH², noise
/// variance) and the SNR feeds Q(√SNR). Cells where the model is undefined
/// or nonpositive propagate as undefined.
pub fn ber_map(
    model: &dyn PointModel,
    lamp: &LampPose,
    region: &Region,
    height: f64,
    resolution: f64,
    ref_power: f64,
    noise_variance: f64,
) -> Result<BerMap> {
    region.validate()?;
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::Domain(format!("resolution {resolution} must be positive")));
    }
    if !(ref_power > 0.0) || !ref_power.is_finite() {
        return Err(Error::Domain(format!(
            "reference power {ref_power} must be positive"
        )));
    }
    if noise_variance < 0.0 || !noise_variance.is_finite() {
        return Err(Error::Domain(format!(
            "noise variance {noise_variance} must be nonnegative"
        )));
    }
    let nx = ((region.x.1 - region.x.0) / resolution).floor() as usize + 1;
    let ny = ((region.y.1 - region.y.0) / resolution).floor() as usize + 1;
    let mut cells = Vec::with_capacity(nx * ny);
    let mut undefined_cells = 0usize;
    for iy in 0..ny {
        let y = region.y.0 + iy as f64 * resolution;
        for ix in 0..nx {
            let x = region.x.0 + ix as f64 * resolution;
            let cell = match model.eval(&GridPoint::new(x, y, height), lamp) {
                Ok(g) if g > 0.0 && g.is_finite() => {
                    let cell_snr = if noise_variance == 0.0 {
                        f64::INFINITY
                    } else {
                        ref_power * g * g / noise_variance
                    };
                    BerCell {
                        x,
                        y,
                        snr_db: Some(10.0 * cell_snr.log10()),
                        ber: Some(q_function(cell_snr.sqrt())),
                    }
                }
                _ => {
                    undefined_cells += 1;
                    BerCell { x, y, snr_db: None, ber: None }
                }
            };
            cells.push(cell);
        }
    }
    Ok(BerMap { region: *region, height, resolution, nx, ny, cells, undefined_cells })
}

/// Geometry of the reflection-exclusion check: a detector of width
/// `detector_width` behind a lens of focal length `focal_length`, a lamp at
/// height `lamp_height`, a receiver at height `receiver_height`, and
/// horizontal separation `distance`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovParams {
    pub detector_width: f64,
    pub focal_length: f64,
    pub lamp_height: f64,
    pub receiver_height: f64,
    pub distance: f64,
}

impl FovParams {
    /// Standard detector and lamp geometry at the given receiver height and
    /// distance.
    pub fn new(receiver_height: f64, distance: f64) -> Self {
        FovParams {
            detector_width: DEFAULT_DETECTOR_WIDTH_M,
            focal_length: DEFAULT_FOCAL_LENGTH_M,
            lamp_height: crate::geometry::DEFAULT_LAMP_HEIGHT_M,
            receiver_height,
            distance,
        }
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.detector_width,
            self.focal_length,
            self.lamp_height,
            self.receiver_height,
            self.distance,
        ];
        if all.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::Domain(
                "all field-of-view parameters must be positive and finite".into(),
            ));
        }
        if self.receiver_height > self.lamp_height {
            return Err(Error::Domain(format!(
                "receiver height {} above lamp height {}",
                self.receiver_height, self.lamp_height
            )));
        }
        Ok(())
    }
}

/// Outcome of the reflection-exclusion test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FovCheck {
    /// True when the ground reflection cannot enter the detector's FOV.
    pub reflection_excluded: bool,
    /// Slack of the exclusion inequality, radians (negative once violated).
    pub margin: f64,
}

/// Checks arctan(l/2F) ≤ arctan((Z+S)/D) + arctan((Z−S)/D): the detector
/// half-FOV against the angular separation between the direct ray and the
/// mirror-image ray of the ground reflection.
pub fn fov_check(params: &FovParams) -> Result<FovCheck> {
    params.validate()?;
    let half_fov = (params.detector_width / (2.0 * params.focal_length)).atan();
    let z = params.lamp_height;
    let s = params.receiver_height;
    let d = params.distance;
    let separation = ((z + s) / d).atan() + ((z - s) / d).atan();
    let margin = separation - half_fov;
    Ok(FovCheck { reflection_excluded: margin >= 0.0, margin })
}

/// Distance at which the exclusion inequality first fails, located by
/// bisection to within 0.1 m. The `distance` field of `params` is ignored;
/// the margin is strictly decreasing in distance, so the crossing is unique.
pub fn fov_crossover(params: &FovParams) -> Result<f64> {
    let margin_at = |d: f64| -> Result<f64> {
        Ok(fov_check(&FovParams { distance: d, ..*params })?.margin)
    };
    let mut lo = 0.1;
    let mut hi = 10_000.0;
    if margin_at(lo)? <= 0.0 {
        return Err(Error::Domain(
            "reflection already enters the FOV at 0.1 m; no crossover to find".into(),
        ));
    }
    if margin_at(hi)? > 0.0 {
        return Err(Error::Domain(
            "reflection stays excluded beyond 10 km; no crossover to find".into(),
        ));
    }
    while hi - lo > 0.1 {
        let mid = 0.5 * (lo + hi);
        if margin_at(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

// ---------------------------------------------------------------------------
