//! Point-evaluable channel models, the Lambertian baseline, error metrics,
//! and dB-scale coverage maps.

use serde::{Deserialize, Serialize};

use crate::dataset::MeasurementRecord;
use crate::error::{Error, Result};
use crate::geometry::{irradiance_angle, to_spherical, GridPoint, LampPose, REFERENCE_POINT};
use crate::glm::FittedModel;

/// Default node spacing of coverage maps, meters.
pub const DEFAULT_MAP_RESOLUTION: f64 = 1.0;
/// Default receiver heights of coverage maps, meters.
pub const DEFAULT_MAP_HEIGHTS: [f64; 3] = [0.75, 1.0, 1.35];
/// Default coverage region, meters.
pub const DEFAULT_MAP_REGION: Region = Region { x: (0.0, 100.0), y: (-25.0, 25.0) };

/// Anything that predicts a channel gain ΔH at a grid point.
pub trait PointModel {
    fn eval(&self, point: &GridPoint, lamp: &LampPose) -> Result<f64>;
}

impl PointModel for FittedModel {
    fn eval(&self, point: &GridPoint, lamp: &LampPose) -> Result<f64> {
        self.eval_point(point, lamp)
    }
}

/// Axially symmetric emitter: ΔH = I₀·cosᵛ(φ)/d², zero behind the beam plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambertianModel {
    pub i0: f64,
    /// Beam-concentration exponent.
    pub nu: f64,
}

impl LambertianModel {
    /// Gain and a forward-visibility flag; points at or behind the beam's
    /// right-angle plane get zero gain and `false`.
    pub fn eval_visible(&self, point: &GridPoint, lamp: &LampPose) -> Result<(f64, bool)> {
        let phi = irradiance_angle(point, lamp)?;
        let c = phi.cos();
        if c <= 0.0 {
            return Ok((0.0, false));
        }
        let d = to_spherical(point, lamp)?.d;
        Ok((self.i0 * c.powf(self.nu) / (d * d), true))
    }
}

impl PointModel for LambertianModel {
    fn eval(&self, point: &GridPoint, lamp: &LampPose) -> Result<f64> {
        Ok(self.eval_visible(point, lamp)?.0)
    }
}

/// Gain predictions for a record set.
pub fn predict_all(
    model: &dyn PointModel,
    records: &[MeasurementRecord],
    lamp: &LampPose,
) -> Result<Vec<f64>> {
    records.iter().map(|r| model.eval(&r.point, lamp)).collect()
}

/// Mean absolute relative error, percent. Every actual value must be nonzero.
pub fn percent_error(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() || actual.is_empty() {
        return Err(Error::Data(format!(
            "{} predictions for {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    if let Some(i) = actual.iter().position(|a| *a == 0.0) {
        return Err(Error::Domain(format!(
            "relative error undefined: actual value {i} is zero"
        )));
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| ((p - a) / a).abs())
        .sum();
    Ok(100.0 * total / actual.len() as f64)
}

/// Root-mean-square error.
pub fn rmse(predicted: &[f64], actual: &[f64]) -> Result<f64> {
    if predicted.len() != actual.len() || actual.is_empty() {
        return Err(Error::Data(format!(
            "{} predictions for {} actuals",
            predicted.len(),
            actual.len()
        )));
    }
    let total: f64 = predicted
        .iter()
        .zip(actual)
        .map(|(p, a)| (p - a) * (p - a))
        .sum();
    Ok((total / actual.len() as f64).sqrt())
}

/// Fits the Lambertian baseline to gain records by profiled least squares.
///
/// For each candidate exponent ν the amplitude has the closed form
/// I₀(ν) = Σyᵢcᵢ/Σcᵢ² with cᵢ = cosᵛ(φᵢ)/dᵢ²; the exponent is located by a
/// coarse 0.5-step scan of `nu_range` followed by golden-section refinement
/// to a bracket no wider than 0.01.
pub fn lambertian_fit(
    records: &[MeasurementRecord],
    lamp: &LampPose,
    nu_range: (f64, f64),
) -> Result<LambertianModel> {
    let (lo, hi) = nu_range;
    if !(lo > 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::Domain(format!(
            "exponent range ({lo}, {hi}) must satisfy 0 < lo < hi"
        )));
    }
    if records.is_empty() {
        return Err(Error::Data("no records to fit".into()));
    }
    // Geometry per record: cos of the irradiance angle and 1/d².
    let mut shape = Vec::with_capacity(records.len());
    for r in records {
        let c = irradiance_angle(&r.point, lamp)?.cos();
        let d = to_spherical(&r.point, lamp)?.d;
        shape.push((c, 1.0 / (d * d), r.delta_h));
    }
    if shape.iter().all(|(c, ..)| *c <= 0.0) {
        return Err(Error::Domain(
            "no record lies in the forward beam; the exponent is unidentifiable".into(),
        ));
    }

    // Residual sum of squares at ν with the profiled amplitude.
    let rss_at = |nu: f64| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for &(c, inv_d2, y) in &shape {
            if c > 0.0 {
                let basis = c.powf(nu) * inv_d2;
                num += y * basis;
                den += basis * basis;
            }
        }
        let i0 = if den > 0.0 { num / den } else { 0.0 };
        let rss = shape
            .iter()
            .map(|&(c, inv_d2, y)| {
                let pred = if c > 0.0 { i0 * c.powf(nu) * inv_d2 } else { 0.0 };
                (y - pred) * (y - pred)
            })
            .sum();
        (i0, rss)
    };

    let mut best_nu = lo;
    let mut best_rss = f64::INFINITY;
    let mut nu = lo;
    while nu < hi + 0.25 {
        let v = nu.min(hi);
        let (_, rss) = rss_at(v);
        if rss < best_rss {
            best_rss = rss;
            best_nu = v;
        }
        nu += 0.5;
    }

    // Golden-section refinement of the winning half-unit bracket.
    let mut a = (best_nu - 0.5).max(lo);
    let mut b = (best_nu + 0.5).min(hi);
    const INV_PHI: f64 = 0.618_033_988_749_894_8;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = rss_at(c).1;
    let mut fd = rss_at(d).1;
    while b - a > 0.01 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = rss_at(c).1;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = rss_at(d).1;
        }
    }
    let nu = 0.5 * (a + b);
    let (i0, _) = rss_at(nu);
    Ok(LambertianModel { i0, nu })
}

/// Scale convention for expressing gain ratios in decibels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DbConvention {
    /// 10·log₁₀ of the ratio (gains treated as intensities; the default).
    #[default]
    Intensity,
    /// 20·log₁₀ of the ratio (gains treated as amplitudes).
    Amplitude,
}

impl DbConvention {
    pub fn factor(self) -> f64 {
        match self {
            DbConvention::Intensity => 10.0,
            DbConvention::Amplitude => 20.0,
        }
    }

    pub fn to_db(self, linear: f64) -> f64 {
        self.factor() * linear.log10()
    }

    pub fn from_db(self, db: f64) -> f64 {
        10f64.powf(db / self.factor())
    }
}

/// Axis-aligned ground region, meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Region {
    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.x.0 < self.x.1 && self.y.0 < self.y.1)
            || !(self.x.0.is_finite() && self.x.1.is_finite())
            || !(self.y.0.is_finite() && self.y.1.is_finite())
        {
            return Err(Error::Domain(format!(
                "region x {:?}, y {:?} must be finite ordered intervals",
                self.x, self.y
            )));
        }
        Ok(())
    }
}

/// Gain map over a node grid, in dB relative to the model's gain at the
/// reference point. Cells where the model is undefined or nonpositive hold
/// `None`.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityMap {
    pub region: Region,
    pub heights: Vec<f64>,
    /// Node spacing, meters.
    pub resolution: f64,
    pub nx: usize,
    pub ny: usize,
    /// One flattened `ny`×`nx` plane per height, indexed `iy * nx + ix`.
    pub values_db: Vec<Vec<Option<f64>>>,
    /// Model gain at the reference point (the 0 dB level).
    pub reference_value: f64,
    pub undefined_cells: usize,
    pub convention: DbConvention,
}

impl IntensityMap {
    pub fn x_at(&self, ix: usize) -> f64 {
        self.region.x.0 + ix as f64 * self.resolution
    }

    pub fn y_at(&self, iy: usize) -> f64 {
        self.region.y.0 + iy as f64 * self.resolution
    }

    pub fn value(&self, height_idx: usize, ix: usize, iy: usize) -> Option<f64> {
        self.values_db[height_idx][iy * self.nx + ix]
    }
}

/// Evaluates a model over grid nodes spaced `resolution` apart and expresses
/// each gain in dB relative to the model's reference-point gain.
pub fn intensity_map(
    model: &dyn PointModel,
    lamp: &LampPose,
    region: &Region,
    heights: &[f64],
    resolution: f64,
    convention: DbConvention,
) -> Result<IntensityMap> {
    region.validate()?;
    if !(resolution > 0.0) || !resolution.is_finite() {
        return Err(Error::Domain(format!("resolution {resolution} must be positive")));
    }
    if heights.is_empty() {
        return Err(Error::Domain("at least one receiver height is required".into()));
    }
    let reference_value = model.eval(&REFERENCE_POINT, lamp)?;
    if !(reference_value > 0.0) || !reference_value.is_finite() {
        return Err(Error::Domain(format!(
            "model reference gain {reference_value} is not positive; no 0 dB level exists"
        )));
    }
    let nx = ((region.x.1 - region.x.0) / resolution).floor() as usize + 1;
    let ny = ((region.y.1 - region.y.0) / resolution).floor() as usize + 1;
    let mut values_db = Vec::with_capacity(heights.len());
    let mut undefined_cells = 0usize;
    for &z in heights {
        let mut plane = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            let y = region.y.0 + iy as f64 * resolution;
            for ix in 0..nx {
                let x = region.x.0 + ix as f64 * resolution;
                let cell = match model.eval(&GridPoint::new(x, y, z), lamp) {
                    Ok(v) if v > 0.0 && v.is_finite() => {
                        Some(convention.to_db(v / reference_value))
                    }
                    _ => None,
                };
                if cell.is_none() {
                    undefined_cells += 1;
                }
                plane.push(cell);
            }
        }
        values_db.push(plane);
    }
    Ok(IntensityMap {
        region: *region,
        heights: heights.to_vec(),
        resolution,
        nx,
        ny,
        values_db,
        reference_value,
        undefined_cells,
        convention,
    })
}

/// Model-vs-measurement deviation at one record.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyCell {
    pub point: GridPoint,
    pub measured: f64,
    /// Model gain; `None` when the model is undefined or nonpositive here.
    pub predicted: Option<f64>,
    /// Signed dB deviation of prediction from measurement.
    pub deviation_db: Option<f64>,
}

/// Per-record deviations plus their summary statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct AccuracyMap {
    pub cells: Vec<AccuracyCell>,
    pub mean_abs_deviation_db: f64,
    pub max_abs_deviation_db: f64,
    pub undefined_cells: usize,
    pub convention: DbConvention,
}

/// Compares a model against measured records point by point, reporting each
/// deviation in dB (prediction relative to measurement).
pub fn accuracy_map(
    model: &dyn PointModel,
    records: &[MeasurementRecord],
    lamp: &LampPose,
    convention: DbConvention,
) -> Result<AccuracyMap> {
    if records.is_empty() {
        return Err(Error::Data("no records to compare against".into()));
    }
    let mut cells = Vec::with_capacity(records.len());
    let mut undefined = 0usize;
    let mut sum_abs = 0.0;
    let mut max_abs = 0.0f64;
    let mut defined = 0usize;
    for r in records {
        if !(r.delta_h > 0.0) {
            return Err(Error::Domain(format!(
                "record at ({}, {}, {}) has nonpositive gain {}",
                r.point.x, r.point.y, r.point.z, r.delta_h
            )));
        }
        let predicted = match model.eval(&r.point, lamp) {
            Ok(v) if v > 0.0 && v.is_finite() => Some(v),
            _ => None,
        };
        let deviation_db = predicted.map(|p| convention.to_db(p / r.delta_h));
        match deviation_db {
            Some(dev) => {
                defined += 1;
                sum_abs += dev.abs();
                max_abs = max_abs.max(dev.abs());
            }
            None => undefined += 1,
        }
        cells.push(AccuracyCell {
            point: r.point,
            measured: r.delta_h,
            predicted,
            deviation_db,
        });
    }
    if defined == 0 {
        return Err(Error::Data(
            "model is undefined at every measured point".into(),
        ));
    }
    Ok(AccuracyMap {
        cells,
        mean_abs_deviation_db: sum_abs / defined as f64,
        max_abs_deviation_db: max_abs,
        undefined_cells: undefined,
        convention,
    })
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::{enumerate_terms, ModelFamily, OrderSpec};
    use crate::glm::{fit, ErrorFamily};

    struct ConstantModel(f64);

    impl PointModel for ConstantModel {
        fn eval(&self, _point: &GridPoint, _lamp: &LampPose) -> Result<f64> {
            Ok(self.0)
        }
    }

    fn test_grid() -> Vec<GridPoint> {
        let mut points = Vec::new();
        for x in [3.0, 4.0, 5.0, 7.0, 10.0, 15.0, 20.0, 25.0, 30.0] {
            for y in [0.75, 2.75, 4.75] {
                for z in [0.75, 1.0, 1.35] {
                    points.push(GridPoint::new(x, y, z));
                }
            }
        }
        points
    }

    fn lambertian_records(i0: f64, nu: f64) -> Vec<MeasurementRecord> {
        let lamp = LampPose::default();
        let model = LambertianModel { i0, nu };
        test_grid()
            .into_iter()
            .map(|p| MeasurementRecord {
                point: p,
                delta_h: model.eval(&p, &lamp).unwrap(),
                delta_h_db: None,
                tag: None,
            })
            .collect()
    }

    #[test]
    fn metrics_match_hand_computation() {
        let pred = [1.1, 1.8, 4.0];
        let actual = [1.0, 2.0, 4.0];
        // Relative errors 10%, 10%, 0%.
        assert!((percent_error(&pred, &actual).unwrap() - 20.0 / 3.0).abs() < 1e-12);
        let expected_rmse = ((0.01 + 0.04 + 0.0) / 3.0f64).sqrt();
        assert!((rmse(&pred, &actual).unwrap() - expected_rmse).abs() < 1e-12);
        assert!(percent_error(&pred, &[1.0, 0.0, 4.0]).is_err());
        assert!(percent_error(&pred, &actual[..2]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn db_conventions_invert_each_other() {
        let intensity = DbConvention::Intensity;
        assert!((intensity.from_db(-15.0) - 0.03162).abs() < 1e-4);
        assert!((intensity.to_db(0.5) + 3.0103).abs() < 1e-4);
        let amplitude = DbConvention::Amplitude;
        assert!((amplitude.from_db(-15.0) - 0.17783).abs() < 1e-4);
        for v in [1e-3, 0.5, 1.0, 42.0] {
            assert!((intensity.from_db(intensity.to_db(v)) - v).abs() < 1e-12 * v);
            assert!((amplitude.from_db(amplitude.to_db(v)) - v).abs() < 1e-12 * v);
        }
        assert_eq!(DbConvention::default(), DbConvention::Intensity);
    }

    #[test]
    fn lambertian_gain_drops_off_axis_and_vanishes_behind() {
        let lamp = LampPose::default();
        let model = LambertianModel { i0: 2.0, nu: 22.0 };
        // Same distance from the lamp, increasing lateral offset → less gain.
        let on = model.eval(&GridPoint::new(10.0, 0.0, 1.0), &lamp).unwrap();
        let off = model.eval(&GridPoint::new(10.0, 3.0, 1.0), &lamp).unwrap();
        assert!(on > off && off > 0.0);
        // A receiver above the lamp is behind the plane normal to the beam:
        // the half-space boundary runs through the lamp, so with the beam
        // pitched down toward (14, 0, 0) only points well above it qualify.
        let (gain, forward) = model
            .eval_visible(&GridPoint::new(0.05, 0.0, 3.5), &lamp)
            .unwrap();
        assert!(!forward);
        assert_eq!(gain, 0.0);
    }

    #[test]
    fn lambertian_fit_recovers_amplitude_and_exponent() {
        let lamp = LampPose::default();
        let records = lambertian_records(2.0, 22.0);
        let fit = lambertian_fit(&records, &lamp, (1.0, 60.0)).unwrap();
        assert!((fit.nu - 22.0).abs() <= 0.01, "nu {}", fit.nu);
        assert!((fit.i0 - 2.0).abs() <= 0.01 * 2.0, "i0 {}", fit.i0);
        let predictions = predict_all(&fit, &records, &lamp).unwrap();
        let actual: Vec<f64> = records.iter().map(|r| r.delta_h).collect();
        assert!(percent_error(&predictions, &actual).unwrap() < 0.5);
    }

    #[test]
    fn lambertian_fit_rejects_degenerate_setups() {
        let lamp = LampPose::default();
        let records = lambertian_records(2.0, 22.0);
        assert!(lambertian_fit(&records, &lamp, (5.0, 2.0)).is_err());
        assert!(lambertian_fit(&[], &lamp, (1.0, 60.0)).is_err());
        // Every record behind the beam plane (well above the pitched-down lamp).
        let behind: Vec<MeasurementRecord> = [3.2, 3.5, 3.8]
            .iter()
            .map(|&z| MeasurementRecord {
                point: GridPoint::new(0.05, 0.0, z),
                delta_h: 0.1,
                delta_h_db: None,
                tag: None,
            })
            .collect();
        let err = lambertian_fit(&behind, &lamp, (1.0, 60.0)).unwrap_err();
        assert!(err.to_string().contains("forward beam"), "{err}");
    }

    #[test]
    fn constant_model_maps_to_zero_db_everywhere() {
        let lamp = LampPose::default();
        let region = Region { x: (1.0, 5.0), y: (-2.0, 2.0) };
        let map = intensity_map(
            &ConstantModel(0.7),
            &lamp,
            &region,
            &[1.0],
            1.0,
            DbConvention::Intensity,
        )
        .unwrap();
        assert_eq!((map.nx, map.ny), (5, 5));
        assert_eq!(map.undefined_cells, 0);
        assert!((map.reference_value - 0.7).abs() < 1e-15);
        for cell in &map.values_db[0] {
            assert!(cell.unwrap().abs() < 1e-12);
        }
        assert_eq!(map.x_at(0), 1.0);
        assert_eq!(map.y_at(4), 2.0);
    }

    #[test]
    fn map_counts_cells_where_the_model_is_undefined() {
        let lamp = LampPose::default();
        let model = LambertianModel { i0: 2.0, nu: 22.0 };
        let region = Region { x: (0.0, 3.0), y: (0.0, 2.0) };
        let map =
            intensity_map(&model, &lamp, &region, &[1.0, 1.35], 1.0, DbConvention::Intensity)
                .unwrap();
        // The x = 0 column has no defined azimuth: one column per height.
        assert_eq!(map.undefined_cells, 2 * map.ny);
        assert!(map.value(0, 0, 0).is_none());
        assert!(map.value(0, 1, 0).is_some());
        // With the beam aimed 14 m downrange, gain rises with x this close in.
        let near = map.value(0, 1, 0).unwrap();
        let far = map.value(0, 3, 0).unwrap();
        assert!(far > near);
    }

    #[test]
    fn map_rejects_bad_geometry() {
        let lamp = LampPose::default();
        let model = ConstantModel(1.0);
        let bad = Region { x: (5.0, 1.0), y: (0.0, 1.0) };
        assert!(intensity_map(&model, &lamp, &bad, &[1.0], 1.0, DbConvention::Intensity).is_err());
        let region = Region { x: (1.0, 5.0), y: (0.0, 1.0) };
        assert!(intensity_map(&model, &lamp, &region, &[1.0], 0.0, DbConvention::Intensity)
            .is_err());
        assert!(intensity_map(&model, &lamp, &region, &[], 1.0, DbConvention::Intensity).is_err());
        // A model with nonpositive reference gain has no 0 dB level.
        assert!(
            intensity_map(&ConstantModel(0.0), &lamp, &region, &[1.0], 1.0, DbConvention::Intensity)
                .is_err()
        );
    }

    #[test]
    fn accuracy_map_is_flat_for_the_generating_model() {
        let lamp = LampPose::default();
        let model = LambertianModel { i0: 2.0, nu: 22.0 };
        let records = lambertian_records(2.0, 22.0);
        let map = accuracy_map(&model, &records, &lamp, DbConvention::Intensity).unwrap();
        assert_eq!(map.cells.len(), records.len());
        assert_eq!(map.undefined_cells, 0);
        assert!(map.max_abs_deviation_db < 1e-10);
    }

    #[test]
    fn five_percent_noise_keeps_deviations_well_under_a_decibel() {
        let lamp = LampPose::default();
        let model = LambertianModel { i0: 2.0, nu: 22.0 };
        let records: Vec<MeasurementRecord> = lambertian_records(2.0, 22.0)
            .into_iter()
            .enumerate()
            .map(|(i, mut r)| {
                r.delta_h *= 1.0 + 0.05 * (i as f64 * 2.399).sin();
                r
            })
            .collect();
        let map = accuracy_map(&model, &records, &lamp, DbConvention::Intensity).unwrap();
        // 10·log10(1.05) ≈ 0.21 dB: local deviations stay small.
        assert!(map.max_abs_deviation_db < 0.25, "max {}", map.max_abs_deviation_db);
        assert!(map.mean_abs_deviation_db < 0.2, "mean {}", map.mean_abs_deviation_db);
    }

    #[test]
    fn under_ordered_fit_shows_structure_above_one_decibel() {
        let lamp = LampPose::default();
        let records = lambertian_records(2.0, 22.0);
        let orders = OrderSpec::new(1, 2, 0).unwrap();
        assert_eq!(enumerate_terms(ModelFamily::I1, &orders).unwrap().len(), 3);
        let low_order =
            fit(&records, &lamp, ModelFamily::I1, &orders, ErrorFamily::Normal).unwrap();
        let map = accuracy_map(&low_order, &records, &lamp, DbConvention::Intensity).unwrap();
        assert!(
            map.max_abs_deviation_db > 1.0,
            "a 3-term surface should misfit a 22nd-power lobe: max {}",
            map.max_abs_deviation_db
        );
    }
}
