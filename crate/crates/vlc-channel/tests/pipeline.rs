//! End-to-end flows across module boundaries: dataset files fitted models,
//! waveform noise statistics into link-budget numbers, and map/sweep outputs
//! against direct evaluation.

use vlc_channel::basis::ModelFamily;
use vlc_channel::basis::OrderSpec;
use vlc_channel::dataset;
use vlc_channel::geometry::{GridPoint, LampPose, REFERENCE_POINT};
use vlc_channel::glm::{self, ErrorFamily, FittedModel};
use vlc_channel::models::{self, DbConvention, LambertianModel, PointModel, Region};
use vlc_channel::perf;
use vlc_channel::signal::{self, SymbolSequence};

fn lambertian() -> LambertianModel {
    LambertianModel { i0: 1.0, nu: 22.0 }
}

#[test]
fn dataset_files_roundtrip_without_drift() {
    let dir = tempfile::tempdir().unwrap();
    let lamp = LampPose::default();
    let ds = dataset::synthesize(
        &lambertian(),
        &dataset::measurement_grid(),
        lamp,
        REFERENCE_POINT,
        2.0,
        3,
    )
    .unwrap();

    // JSON keeps everything, including the content hash.
    let json_path = dir.path().join("campaign.json");
    ds.save_json(&json_path).unwrap();
    let from_json = dataset::Dataset::load_json(&json_path).unwrap();
    assert_eq!(from_json.hash(), ds.hash());
    assert_eq!(from_json.records(), ds.records());

    // CSV drops nothing these records carry, so ingest reproduces the hash.
    let csv_path = dir.path().join("campaign.csv");
    ds.export_csv(&csv_path).unwrap();
    let from_csv = dataset::ingest(&csv_path, lamp, REFERENCE_POINT).unwrap();
    assert_eq!(from_csv.hash(), ds.hash());
    assert_eq!(from_csv.len(), 162);
}

#[test]
fn fitted_model_survives_serialization() {
    let dir = tempfile::tempdir().unwrap();
    let lamp = LampPose::default();
    let ds = dataset::synthesize(
        &lambertian(),
        &dataset::measurement_grid(),
        lamp,
        REFERENCE_POINT,
        1.0,
        11,
    )
    .unwrap();
    let fitted = glm::fit(
        ds.records(),
        &lamp,
        ModelFamily::I2,
        &OrderSpec { p: 3, beta_max: 2, r: 1 },
        ErrorFamily::Poisson,
    )
    .unwrap();

    let path = dir.path().join("model.json");
    fitted.save(&path).unwrap();
    let loaded = FittedModel::load(&path).unwrap();
    loaded.validate().unwrap();
    assert_eq!(loaded.coefficients, fitted.coefficients);
    assert_eq!(loaded.terms, fitted.terms);

    // Identical predictions everywhere, not just identical bytes.
    for p in [
        REFERENCE_POINT,
        GridPoint::new(3.0, 0.75, 0.75),
        GridPoint::new(30.0, 5.75, 1.35),
        GridPoint::new(12.5, 2.2, 1.0),
    ] {
        let a = fitted.eval_point(&p, &lamp).unwrap();
        let b = loaded.eval_point(&p, &lamp).unwrap();
        assert_eq!(a, b, "prediction drift at ({}, {}, {})", p.x, p.y, p.z);
    }

    let d_orig = fitted.diagnostics.unwrap();
    let d_load = loaded.diagnostics.unwrap();
    assert_eq!(d_orig.iterations, d_load.iterations);
    assert_eq!(d_orig.rmse, d_load.rmse);
}

#[test]
fn noise_estimate_feeds_snr_and_ber() {
    let gain = 0.2;
    let sigma = 0.05;
    let tx = signal::synthesize_tx(1.0, 5e-6, 1, 250e6 / 50.0, &SymbolSequence::default())
        .unwrap();
    // Unfiltered reference: the receive chain with unit gain and no noise.
    let reference = signal::simulate_rx(&tx, 1.0, None, None, 0.0, 0).unwrap();

    let periods: Vec<_> = (0..40)
        .map(|i| signal::simulate_rx(&tx, gain, None, None, sigma, 100 + i).unwrap())
        .collect();
    let est = perf::estimate_noise(&periods, &reference, gain).unwrap();

    assert_eq!(est.sample_count, periods.len() * reference.len());
    let histogram_total: usize = est.histogram.counts.iter().sum();
    assert_eq!(histogram_total, est.sample_count);
    let rel = (est.variance / (sigma * sigma) - 1.0).abs();
    assert!(rel < 0.05, "variance {} vs sigma^2 {} ({rel:.4} rel)", est.variance, sigma * sigma);
    assert!(est.mean.abs() < 5.0 * sigma / (est.sample_count as f64).sqrt());

    // SNR from the estimate matches the analytic value and feeds ber().
    let snr = perf::snr(&reference, gain, est.variance).unwrap();
    let mean_sq =
        reference.samples.iter().map(|s| s * s).sum::<f64>() / reference.len() as f64;
    let expected = mean_sq * gain * gain / est.variance;
    assert!((snr / expected - 1.0).abs() < 1e-12);
    let p_e = perf::ber(snr).unwrap();
    assert_eq!(p_e, perf::q_function(snr.sqrt()));
    assert!(p_e > 0.0 && p_e < 0.5);
}

#[test]
fn intensity_map_matches_direct_evaluation() {
    let lamp = LampPose::default();
    let model = lambertian();
    // Region straddles the lamp plane on purpose: x <= 0 nodes are undefined.
    let region = Region { x: (-1.0, 8.0), y: (-2.0, 2.0) };
    let map = models::intensity_map(&model, &lamp, &region, &[1.0], 0.5, DbConvention::Intensity)
        .unwrap();

    let reference = model.eval(&REFERENCE_POINT, &lamp).unwrap();
    assert!((map.reference_value - reference).abs() <= 1e-15 * reference);
    assert!(map.undefined_cells > 0, "nodes behind the lamp plane must be blank");

    let mut checked = 0;
    for iy in 0..map.ny {
        for ix in 0..map.nx {
            let x = map.x_at(ix);
            let y = map.y_at(iy);
            match map.value(0, ix, iy) {
                Some(db) => {
                    let gain = model.eval(&GridPoint::new(x, y, 1.0), &lamp).unwrap();
                    let expected = DbConvention::Intensity.to_db(gain / reference);
                    assert!(
                        (db - expected).abs() <= 1e-9,
                        "node ({x}, {y}): map {db} dB vs direct {expected} dB"
                    );
                    checked += 1;
                }
                None => assert!(x <= 0.0, "only lamp-plane nodes may be undefined, got x={x}"),
            }
        }
    }
    assert!(checked > 50, "map too sparse to be meaningful: {checked} nodes");
}

#[test]
fn sweep_rows_reproduce_direct_cross_validation() {
    let lamp = LampPose::default();
    let ds = dataset::synthesize(
        &lambertian(),
        &dataset::measurement_grid(),
        lamp,
        REFERENCE_POINT,
        5.0,
        29,
    )
    .unwrap();
    let sweep = glm::sweep(ds.records(), &lamp, ModelFamily::I1, ErrorFamily::Gamma, 5, 41)
        .unwrap();
    assert_eq!(sweep.rows.len(), 36);

    // Every frontier row's score must be reproducible by calling the CV
    // routine directly with the same inputs.
    assert!(!sweep.frontier.is_empty());
    for &idx in &sweep.frontier {
        let row = &sweep.rows[idx];
        let cv = glm::kfold_cv(
            ds.records(),
            &lamp,
            row.family,
            &OrderSpec { p: row.p, beta_max: row.beta_max, r: row.r },
            row.error_family,
            5,
            41,
        )
        .unwrap();
        assert_eq!(Some(cv.percent_error), row.cv_percent_error, "row {idx} score drift");
        assert_eq!(Some(cv.rmse), row.cv_rmse);
    }
}
