//! Subcommand implementations: each resolves its configuration (flags over
//! config file over defaults), hashes the resolved form, runs the library
//! pipeline, and writes provenance-stamped artifacts.

use clap::Args;
use serde_json::json;
use std::io::Write;
use std::path::PathBuf;

use vlc_channel::dataset;
use vlc_channel::geometry::{GridPoint, LampPose, REFERENCE_POINT};
use vlc_channel::glm::{self, ErrorFamily, FittedModel, Provenance, SweepResult, DEFAULT_CV_FOLDS};
use vlc_channel::models::{
    accuracy_map, intensity_map, DbConvention, LambertianModel, PointModel,
    DEFAULT_MAP_HEIGHTS, DEFAULT_MAP_REGION, DEFAULT_MAP_RESOLUTION,
};
use vlc_channel::perf::{
    ber_map, fov_check, fov_crossover, FovParams, DEFAULT_DETECTOR_WIDTH_M,
    DEFAULT_FOCAL_LENGTH_M,
};
use vlc_channel::presets;
use vlc_channel::signal::{
    self, SymbolSequence, DEFAULT_BAND_THRESHOLD, DEFAULT_F_MAX, DEFAULT_HIGHPASS_CUTOFF,
    DEFAULT_LOWPASS_CUTOFF, DEFAULT_PULSE_DURATION, DEFAULT_SAMPLE_RATE,
};
use vlc_channel::{Error, Result};

use crate::config::{
    config_hash, default_orders, natural_error_family, parse_convention, parse_error_family,
    parse_family, parse_heights, parse_orders, parse_point, parse_region, pick, pick_path,
    require, FileConfig,
};
use crate::io::{create_artifact, opt_cell, read_waveform, write_waveform, TOOL};

fn lamp_from(height: Option<f64>, aim_x: Option<f64>) -> LampPose {
    let mut lamp = LampPose::default();
    if let Some(h) = height {
        lamp.height = h;
    }
    if let Some(x) = aim_x {
        lamp.aim.x = x;
    }
    lamp
}

fn point_json(p: &GridPoint) -> serde_json::Value {
    json!([p.x, p.y, p.z])
}

/// A model argument pair resolved to a point model plus its description (for
/// the config hash) and the dataset hash it carries, when any.
fn resolve_model(
    model: Option<PathBuf>,
    preset: Option<String>,
    nu: Option<f64>,
    i0: Option<f64>,
) -> Result<(Box<dyn PointModel>, serde_json::Value, Option<String>)> {
    match (model, preset) {
        (Some(path), None) => {
            let fitted = FittedModel::load(&path)?;
            let dataset_hash = fitted.provenance.as_ref().map(|p| p.dataset_hash.clone());
            Ok((Box::new(fitted), json!({ "model": path.display().to_string() }), dataset_hash))
        }
        (None, Some(name)) => match name.as_str() {
            "i1-reference" => {
                Ok((Box::new(presets::i1_reference()), json!({ "preset": name }), None))
            }
            "i2-reference" => {
                Ok((Box::new(presets::i2_reference()), json!({ "preset": name }), None))
            }
            "lambertian" => {
                let nu = nu.unwrap_or(22.0);
                let i0 = i0.unwrap_or(1.0);
                Ok((
                    Box::new(LambertianModel { i0, nu }),
                    json!({ "preset": name, "nu": nu, "i0": i0 }),
                    None,
                ))
            }
            _ => Err(Error::Domain(format!(
                "unknown preset {name:?} (expected i1-reference, i2-reference, or lambertian)"
            ))),
        },
        (None, None) => Err(Error::Domain("one of --model or --preset is required".into())),
        (Some(_), Some(_)) => {
            Err(Error::Domain("--model and --preset are mutually exclusive".into()))
        }
    }
}

// ---------------------------------------------------------------------------
// fit

/// Fit a gain model to a measurement CSV.
#[derive(Debug, Args)]
pub struct FitArgs {
    /// Measurement CSV (x_m, y_m, z_m, delta_h_db|delta_h_linear).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Intensity model family: i1, i2, or i3.
    #[arg(long)]
    pub family: Option<String>,
    /// Error distribution: normal, poisson, or gamma (default: the family's
    /// canonical pairing).
    #[arg(long)]
    pub error_family: Option<String>,
    /// Polynomial orders p,beta_max[,r].
    #[arg(long)]
    pub orders: Option<String>,
    #[arg(long)]
    pub lamp_height: Option<f64>,
    #[arg(long)]
    pub aim_x: Option<f64>,
    /// Reference point x,y,z whose gain anchors 0 dB.
    #[arg(long, allow_hyphen_values = true)]
    pub reference: Option<String>,
    /// Output model JSON path.
    #[arg(long)]
    pub out_model: Option<PathBuf>,
    /// Output accuracy CSV path.
    #[arg(long)]
    pub out_accuracy: Option<PathBuf>,
    /// dB convention for the accuracy map: intensity or amplitude.
    #[arg(long)]
    pub convention: Option<String>,
}

pub fn cmd_fit(args: FitArgs, cfg: &FileConfig) -> Result<()> {
    let data = require(pick_path(args.data.as_ref(), cfg.data.as_ref()), None, "data")?;
    let family = parse_family(&pick(args.family, cfg.family.clone()).unwrap_or("i1".into()))?;
    let error_family = match pick(args.error_family, cfg.error_family.clone()) {
        Some(s) => parse_error_family(&s)?,
        None => natural_error_family(family),
    };
    let orders = match pick(args.orders, cfg.orders.clone()) {
        Some(s) => parse_orders(&s)?,
        None => default_orders(family),
    };
    let lamp_height = pick(args.lamp_height, cfg.lamp_height);
    let aim_x = pick(args.aim_x, cfg.aim_x);
    let lamp = lamp_from(lamp_height, aim_x);
    let reference = match pick(args.reference, cfg.reference.clone()) {
        Some(s) => parse_point(&s, "reference")?,
        None => REFERENCE_POINT,
    };
    let out_model =
        pick_path(args.out_model.as_ref(), cfg.out_model.as_ref()).unwrap_or("model.json".into());
    let out_accuracy = pick_path(args.out_accuracy.as_ref(), cfg.out_accuracy.as_ref())
        .unwrap_or("accuracy.csv".into());
    let convention = match pick(args.convention, cfg.convention.clone()) {
        Some(s) => parse_convention(&s)?,
        None => DbConvention::Intensity,
    };

    let hash = config_hash(&json!({
        "subcommand": "fit",
        "data": data.display().to_string(),
        "family": family.to_string(),
        "error_family": error_family.to_string(),
        "orders": [orders.p, orders.beta_max, orders.r],
        "lamp_height": lamp.height,
        "aim_x": lamp.aim.x,
        "reference": point_json(&reference),
        "out_model": out_model.display().to_string(),
        "out_accuracy": out_accuracy.display().to_string(),
        "convention": format!("{convention:?}").to_lowercase(),
    }));

    let ds = dataset::ingest(&data, lamp, reference)?;
    let mut model = glm::fit(ds.records(), &lamp, family, &orders, error_family)?;
    model.provenance = Some(Provenance {
        dataset_hash: ds.hash().to_string(),
        seed: None,
        folds: None,
        tool: Some(TOOL.to_string()),
        config_hash: Some(hash.clone()),
    });
    model.save(&out_model)?;

    let acc = accuracy_map(&model, ds.records(), &lamp, convention)?;
    let mut out = create_artifact(&out_accuracy, &hash, Some(ds.hash()))?;
    writeln!(out, "x_m,y_m,z_m,measured,predicted,deviation_db")?;
    for cell in &acc.cells {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            cell.point.x,
            cell.point.y,
            cell.point.z,
            cell.measured,
            opt_cell(cell.predicted),
            opt_cell(cell.deviation_db)
        )?;
    }
    out.flush()?;

    let diag = model.diagnostics.as_ref().expect("fit fills diagnostics");
    println!(
        "fit: n={} records, family={family}, error_family={error_family}, \
         orders=({}, {}, {}), terms={}, iterations={}, converged={}, \
         percent_error={}, rmse={} -> {}, {}",
        ds.len(),
        orders.p,
        orders.beta_max,
        orders.r,
        model.terms.len(),
        diag.iterations,
        diag.converged,
        diag.percent_error,
        diag.rmse,
        out_model.display(),
        out_accuracy.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep

/// Cross-validate every polynomial order configuration.
#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub family: Option<String>,
    #[arg(long)]
    pub error_family: Option<String>,
    /// Sweep normal, poisson, and gamma in one run (three file pairs).
    #[arg(long)]
    pub all_error_families: bool,
    /// Cross-validation folds.
    #[arg(long)]
    pub k: Option<usize>,
    /// Fold-shuffle seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lamp_height: Option<f64>,
    #[arg(long)]
    pub aim_x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub reference: Option<String>,
    /// Sweep CSV path (single error family only).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Frontier CSV path (single error family only).
    #[arg(long)]
    pub out_frontier: Option<PathBuf>,
}

fn write_sweep_csv(
    path: &PathBuf,
    rows: &[&glm::SweepRow],
    hash: &str,
    dataset_hash: &str,
) -> Result<()> {
    let out = create_artifact(path, hash, Some(dataset_hash))?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Io(std::io::Error::other(format!("{}: {e}", path.display())));
    w.write_record(["p", "beta_max", "r", "terms", "cv_err_pct", "cv_rmse", "train_err_pct", "train_rmse", "note"])
        .map_err(csv_err)?;
    for row in rows {
        w.write_record([
            row.p.to_string(),
            row.beta_max.to_string(),
            row.r.to_string(),
            row.n_terms.to_string(),
            opt_cell(row.cv_percent_error),
            opt_cell(row.cv_rmse),
            opt_cell(row.train_percent_error),
            opt_cell(row.train_rmse),
            row.note.clone().unwrap_or_default(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn cmd_sweep(args: SweepArgs, cfg: &FileConfig) -> Result<()> {
    let data = require(pick_path(args.data.as_ref(), cfg.data.as_ref()), None, "data")?;
    let family = parse_family(&pick(args.family, cfg.family.clone()).unwrap_or("i1".into()))?;
    let all = args.all_error_families || cfg.all_error_families.unwrap_or(false);
    let error_families: Vec<ErrorFamily> = if all {
        vec![ErrorFamily::Normal, ErrorFamily::Poisson, ErrorFamily::Gamma]
    } else {
        vec![match pick(args.error_family, cfg.error_family.clone()) {
            Some(s) => parse_error_family(&s)?,
            None => natural_error_family(family),
        }]
    };
    if all && (args.out.is_some() || args.out_frontier.is_some()) {
        return Err(Error::Domain(
            "--all-error-families names its own files; drop --out/--out-frontier".into(),
        ));
    }
    let k = pick(args.k, cfg.k).unwrap_or(DEFAULT_CV_FOLDS);
    let seed = pick(args.seed, cfg.seed).unwrap_or(0);
    let lamp = lamp_from(pick(args.lamp_height, cfg.lamp_height), pick(args.aim_x, cfg.aim_x));
    let reference = match pick(args.reference, cfg.reference.clone()) {
        Some(s) => parse_point(&s, "reference")?,
        None => REFERENCE_POINT,
    };

    let ds = dataset::ingest(&data, lamp, reference)?;
    for error_family in error_families {
        let out = pick_path(args.out.as_ref(), cfg.out.as_ref())
            .unwrap_or_else(|| format!("sweep-{family}-{error_family}.csv").into());
        let out_frontier = pick_path(args.out_frontier.as_ref(), cfg.out_frontier.as_ref())
            .unwrap_or_else(|| format!("frontier-{family}-{error_family}.csv").into());
        let hash = config_hash(&json!({
            "subcommand": "sweep",
            "data": data.display().to_string(),
            "family": family.to_string(),
            "error_family": error_family.to_string(),
            "k": k,
            "seed": seed,
            "lamp_height": lamp.height,
            "aim_x": lamp.aim.x,
            "reference": point_json(&reference),
            "out": out.display().to_string(),
            "out_frontier": out_frontier.display().to_string(),
        }));

        let SweepResult { rows, frontier } =
            glm::sweep(ds.records(), &lamp, family, error_family, k, seed)?;
        let all_rows: Vec<&glm::SweepRow> = rows.iter().collect();
        write_sweep_csv(&out, &all_rows, &hash, ds.hash())?;
        let frontier_rows: Vec<&glm::SweepRow> = frontier.iter().map(|&i| &rows[i]).collect();
        write_sweep_csv(&out_frontier, &frontier_rows, &hash, ds.hash())?;

        let scored = rows.iter().filter(|r| r.cv_percent_error.is_some()).count();
        let best = frontier.last().map(|&i| &rows[i]);
        match best {
            Some(b) => println!(
                "sweep: family={family}, error_family={error_family}, {} configurations, \
                 {scored} scored, best cv_err_pct={} at orders=({}, {}, {}) -> {}, {}",
                rows.len(),
                b.cv_percent_error.expect("frontier rows are scored"),
                b.p,
                b.beta_max,
                b.r,
                out.display(),
                out_frontier.display()
            ),
            None => println!(
                "sweep: family={family}, error_family={error_family}, {} configurations, \
                 none scored -> {}, {}",
                rows.len(),
                out.display(),
                out_frontier.display()
            ),
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// eval

/// Evaluate a model at a point, over a grid, or against a dataset.
#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Fitted model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Built-in model: i1-reference, i2-reference, or lambertian.
    #[arg(long)]
    pub preset: Option<String>,
    /// Beam exponent for --preset lambertian.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Amplitude for --preset lambertian.
    #[arg(long)]
    pub i0: Option<f64>,
    /// Single position x,y,z.
    #[arg(long, allow_hyphen_values = true)]
    pub point: Option<String>,
    /// Evaluate over a built-in grid: standard (162 points) or dense (924).
    #[arg(long)]
    pub grid: Option<String>,
    /// Compare against a measurement CSV.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub lamp_height: Option<f64>,
    #[arg(long)]
    pub aim_x: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub reference: Option<String>,
    #[arg(long)]
    pub convention: Option<String>,
    /// Output CSV (required for --grid and --data).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_eval(args: EvalArgs, cfg: &FileConfig) -> Result<()> {
    let (model, model_desc, model_ds_hash) = resolve_model(
        pick_path(args.model.as_ref(), cfg.model.as_ref()),
        pick(args.preset, cfg.preset.clone()),
        pick(args.nu, cfg.nu),
        pick(args.i0, cfg.i0),
    )?;
    let lamp = lamp_from(pick(args.lamp_height, cfg.lamp_height), pick(args.aim_x, cfg.aim_x));
    let convention = match pick(args.convention, cfg.convention.clone()) {
        Some(s) => parse_convention(&s)?,
        None => DbConvention::Intensity,
    };
    let point = pick(args.point, cfg.point.clone());
    let grid = pick(args.grid, cfg.grid.clone());
    let data = pick_path(args.data.as_ref(), cfg.data.as_ref());
    let out = pick_path(args.out.as_ref(), cfg.out.as_ref());
    let sources = point.is_some() as u8 + grid.is_some() as u8 + data.is_some() as u8;
    if sources != 1 {
        return Err(Error::Domain(
            "exactly one of --point, --grid, or --data is required".into(),
        ));
    }

    let hash = config_hash(&json!({
        "subcommand": "eval",
        "model": model_desc,
        "point": point,
        "grid": grid,
        "data": data.as_ref().map(|p| p.display().to_string()),
        "lamp_height": lamp.height,
        "aim_x": lamp.aim.x,
        "convention": format!("{convention:?}").to_lowercase(),
        "out": out.as_ref().map(|p| p.display().to_string()),
    }));

    if let Some(spec) = point {
        let p = parse_point(&spec, "point")?;
        let gain = model.eval(&p, &lamp)?;
        println!("delta_h = {gain} ({} dB)", convention.to_db(gain));
        if let Some(out) = out {
            let mut w = create_artifact(&out, &hash, model_ds_hash.as_deref())?;
            writeln!(w, "x_m,y_m,z_m,predicted,predicted_db")?;
            writeln!(w, "{},{},{},{gain},{}", p.x, p.y, p.z, convention.to_db(gain))?;
            w.flush()?;
        }
        return Ok(());
    }

    if let Some(grid_name) = grid {
        let points = match grid_name.as_str() {
            "standard" => dataset::measurement_grid(),
            "dense" => dataset::dense_grid(),
            _ => {
                return Err(Error::Domain(format!(
                    "unknown grid {grid_name:?} (expected standard or dense)"
                )))
            }
        };
        let out = out.ok_or_else(|| Error::Domain("--grid output needs --out".into()))?;
        let mut w = create_artifact(&out, &hash, model_ds_hash.as_deref())?;
        writeln!(w, "x_m,y_m,z_m,predicted,predicted_db")?;
        let mut undefined = 0usize;
        for p in &points {
            match model.eval(p, &lamp) {
                Ok(g) if g > 0.0 && g.is_finite() => {
                    writeln!(w, "{},{},{},{g},{}", p.x, p.y, p.z, convention.to_db(g))?;
                }
                _ => {
                    undefined += 1;
                    writeln!(w, "{},{},{},,", p.x, p.y, p.z)?;
                }
            }
        }
        w.flush()?;
        println!(
            "eval: {} grid points, {undefined} undefined -> {}",
            points.len(),
            out.display()
        );
        return Ok(());
    }

    let data = data.expect("source arbitration leaves data");
    let reference = match pick(args.reference, cfg.reference.clone()) {
        Some(s) => parse_point(&s, "reference")?,
        None => REFERENCE_POINT,
    };
    let ds = dataset::ingest(&data, lamp, reference)?;
    let out = out.ok_or_else(|| Error::Domain("--data output needs --out".into()))?;
    let acc = accuracy_map(model.as_ref(), ds.records(), &lamp, convention)?;
    let mut w = create_artifact(&out, &hash, Some(ds.hash()))?;
    writeln!(w, "x_m,y_m,z_m,measured,predicted,deviation_db")?;
    for cell in &acc.cells {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            cell.point.x,
            cell.point.y,
            cell.point.z,
            cell.measured,
            opt_cell(cell.predicted),
            opt_cell(cell.deviation_db)
        )?;
    }
    w.flush()?;
    println!(
        "eval: n={} records, mean_abs_deviation_db={}, max_abs_deviation_db={}, undefined={} -> {}",
        ds.len(),
        acc.mean_abs_deviation_db,
        acc.max_abs_deviation_db,
        acc.undefined_cells,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// map

/// Map model gain in dB relative to the reference point.
#[derive(Debug, Args)]
pub struct MapArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub i0: Option<f64>,
    /// Region x0,x1,y0,y1 in meters.
    #[arg(long, allow_hyphen_values = true)]
    pub region: Option<String>,
    /// Receiver heights, comma-separated meters.
    #[arg(long, allow_hyphen_values = true)]
    pub heights: Option<String>,
    /// Node spacing in meters.
    #[arg(long)]
    pub resolution: Option<f64>,
    #[arg(long)]
    pub convention: Option<String>,
    #[arg(long)]
    pub lamp_height: Option<f64>,
    #[arg(long)]
    pub aim_x: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_map(args: MapArgs, cfg: &FileConfig) -> Result<()> {
    let (model, model_desc, model_ds_hash) = resolve_model(
        pick_path(args.model.as_ref(), cfg.model.as_ref()),
        pick(args.preset, cfg.preset.clone()),
        pick(args.nu, cfg.nu),
        pick(args.i0, cfg.i0),
    )?;
    let region = match pick(args.region, cfg.region.clone()) {
        Some(s) => parse_region(&s)?,
        None => DEFAULT_MAP_REGION,
    };
    let heights = match pick(args.heights, cfg.heights.clone()) {
        Some(s) => parse_heights(&s)?,
        None => DEFAULT_MAP_HEIGHTS.to_vec(),
    };
    let resolution = pick(args.resolution, cfg.resolution).unwrap_or(DEFAULT_MAP_RESOLUTION);
    let convention = match pick(args.convention, cfg.convention.clone()) {
        Some(s) => parse_convention(&s)?,
        None => DbConvention::Intensity,
    };
    let lamp = lamp_from(pick(args.lamp_height, cfg.lamp_height), pick(args.aim_x, cfg.aim_x));
    let out = pick_path(args.out.as_ref(), cfg.out.as_ref()).unwrap_or("map.csv".into());

    let hash = config_hash(&json!({
        "subcommand": "map",
        "model": model_desc,
        "region": [region.x.0, region.x.1, region.y.0, region.y.1],
        "heights": heights,
        "resolution": resolution,
        "convention": format!("{convention:?}").to_lowercase(),
        "lamp_height": lamp.height,
        "aim_x": lamp.aim.x,
        "out": out.display().to_string(),
    }));

    let map = intensity_map(model.as_ref(), &lamp, &region, &heights, resolution, convention)?;
    let mut w = create_artifact(&out, &hash, model_ds_hash.as_deref())?;
    writeln!(w, "height_m,x_m,y_m,gain_db")?;
    for (hi, plane) in map.values_db.iter().enumerate() {
        for iy in 0..map.ny {
            for ix in 0..map.nx {
                writeln!(
                    w,
                    "{},{},{},{}",
                    map.heights[hi],
                    map.x_at(ix),
                    map.y_at(iy),
                    opt_cell(plane[iy * map.nx + ix])
                )?;
            }
        }
    }
    w.flush()?;
    println!(
        "map: {} heights x {}x{} cells, undefined={}, reference_gain={} -> {}",
        map.heights.len(),
        map.nx,
        map.ny,
        map.undefined_cells,
        map.reference_value,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// ber

/// Map link SNR and bit error probability over a region.
#[derive(Debug, Args)]
pub struct BerArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub i0: Option<f64>,
    /// Region x0,x1,y0,y1 in meters.
    #[arg(long, allow_hyphen_values = true)]
    pub region: Option<String>,
    /// Receiver height in meters.
    #[arg(long)]
    pub height: Option<f64>,
    #[arg(long)]
    pub resolution: Option<f64>,
    /// Reference mean-square signal power.
    #[arg(long)]
    pub ref_power: Option<f64>,
    /// Receiver noise variance.
    #[arg(long)]
    pub noise_variance: Option<f64>,
    #[arg(long)]
    pub lamp_height: Option<f64>,
    #[arg(long)]
    pub aim_x: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_ber(args: BerArgs, cfg: &FileConfig) -> Result<()> {
    let (model, model_desc, model_ds_hash) = resolve_model(
        pick_path(args.model.as_ref(), cfg.model.as_ref()),
        pick(args.preset, cfg.preset.clone()),
        pick(args.nu, cfg.nu),
        pick(args.i0, cfg.i0),
    )?;
    let region = match pick(args.region, cfg.region.clone()) {
        Some(s) => parse_region(&s)?,
        None => DEFAULT_MAP_REGION,
    };
    let height = pick(args.height, cfg.height).unwrap_or(DEFAULT_MAP_HEIGHTS[0]);
    let resolution = pick(args.resolution, cfg.resolution).unwrap_or(DEFAULT_MAP_RESOLUTION);
    let ref_power = require(pick(args.ref_power, cfg.ref_power), None, "ref-power")?;
    let noise_variance =
        require(pick(args.noise_variance, cfg.noise_variance), None, "noise-variance")?;
    let lamp = lamp_from(pick(args.lamp_height, cfg.lamp_height), pick(args.aim_x, cfg.aim_x));
    let out = pick_path(args.out.as_ref(), cfg.out.as_ref()).unwrap_or("ber.csv".into());

    let hash = config_hash(&json!({
        "subcommand": "ber",
        "model": model_desc,
        "region": [region.x.0, region.x.1, region.y.0, region.y.1],
        "height": height,
        "resolution": resolution,
        "ref_power": ref_power,
        "noise_variance": noise_variance,
        "lamp_height": lamp.height,
        "aim_x": lamp.aim.x,
        "out": out.display().to_string(),
    }));

    let map = ber_map(model.as_ref(), &lamp, &region, height, resolution, ref_power, noise_variance)?;
    let mut w = create_artifact(&out, &hash, model_ds_hash.as_deref())?;
    writeln!(w, "x,y,z,snr_db,p_e")?;
    for cell in &map.cells {
        writeln!(
            w,
            "{},{},{height},{},{}",
            cell.x,
            cell.y,
            opt_cell(cell.snr_db),
            opt_cell(cell.ber)
        )?;
    }
    w.flush()?;
    println!(
        "ber: {}x{} cells at z={height}, undefined={} -> {}",
        map.nx,
        map.ny,
        map.undefined_cells,
        out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// fov

/// Check the reflection-exclusion field-of-view criterion.
#[derive(Debug, Args)]
pub struct FovArgs {
    /// Detector width, meters.
    #[arg(long)]
    pub detector_width: Option<f64>,
    /// Lens focal length, meters.
    #[arg(long)]
    pub focal_length: Option<f64>,
    #[arg(long)]
    pub lamp_height: Option<f64>,
    /// Receiver heights, comma-separated meters.
    #[arg(long, allow_hyphen_values = true)]
    pub heights: Option<String>,
    /// Check the margin at one distance instead of finding the crossover.
    #[arg(long)]
    pub distance: Option<f64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_fov(args: FovArgs, cfg: &FileConfig) -> Result<()> {
    let detector_width =
        pick(args.detector_width, cfg.detector_width).unwrap_or(DEFAULT_DETECTOR_WIDTH_M);
    let focal_length =
        pick(args.focal_length, cfg.focal_length).unwrap_or(DEFAULT_FOCAL_LENGTH_M);
    let lamp_height = pick(args.lamp_height, cfg.lamp_height)
        .unwrap_or(vlc_channel::geometry::DEFAULT_LAMP_HEIGHT_M);
    let heights = match pick(args.heights, cfg.heights.clone()) {
        Some(s) => parse_heights(&s)?,
        None => DEFAULT_MAP_HEIGHTS.to_vec(),
    };
    let distance = pick(args.distance, cfg.distance);
    let out = pick_path(args.out.as_ref(), cfg.out.as_ref());

    let hash = config_hash(&json!({
        "subcommand": "fov",
        "detector_width": detector_width,
        "focal_length": focal_length,
        "lamp_height": lamp_height,
        "heights": heights,
        "distance": distance,
        "out": out.as_ref().map(|p| p.display().to_string()),
    }));

    let mut rows = Vec::new();
    for &h in &heights {
        let params = FovParams {
            detector_width,
            focal_length,
            lamp_height,
            receiver_height: h,
            distance: distance.unwrap_or(1.0),
        };
        match distance {
            Some(d) => {
                let check = fov_check(&params)?;
                println!(
                    "height {h} m at {d} m: margin {} rad, reflection {}",
                    check.margin,
                    if check.reflection_excluded { "excluded" } else { "included" }
                );
                rows.push(format!("{h},{d},{},{}", check.margin, check.reflection_excluded));
            }
            None => {
                let crossover = fov_crossover(&params)?;
                println!("height {h} m: reflection excluded up to {crossover} m");
                rows.push(format!("{h},{crossover}"));
            }
        }
    }
    if let Some(out) = out {
        let mut w = create_artifact(&out, &hash, None)?;
        if distance.is_some() {
            writeln!(w, "height_m,distance_m,margin_rad,excluded")?;
        } else {
            writeln!(w, "height_m,crossover_m")?;
        }
        for row in rows {
            writeln!(w, "{row}")?;
        }
        w.flush()?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// simulate

/// Synthesize a transmitted burst and push it through the receive chain.
#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Transmit amplitude.
    #[arg(long)]
    pub amplitude: Option<f64>,
    /// Symbol pulse duration, seconds.
    #[arg(long)]
    pub pulse: Option<f64>,
    /// Symbol-pattern repetitions.
    #[arg(long)]
    pub periods: Option<usize>,
    /// Samples per second.
    #[arg(long)]
    pub sample_rate: Option<f64>,
    /// Linear channel gain applied to the received copy.
    #[arg(long)]
    pub gain: Option<f64>,
    /// Channel gain in dB (intensity convention); alternative to --gain.
    #[arg(long, allow_negative_numbers = true)]
    pub gain_db: Option<f64>,
    /// Low-pass cutoff, Hz.
    #[arg(long)]
    pub lowpass: Option<f64>,
    /// High-pass cutoff, Hz.
    #[arg(long)]
    pub highpass: Option<f64>,
    /// Bypass both filter stages.
    #[arg(long)]
    pub no_filters: bool,
    /// Additive white Gaussian noise standard deviation.
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Received waveform CSV.
    #[arg(long)]
    pub out_rx: Option<PathBuf>,
    /// Unit-gain noiseless reference waveform CSV.
    #[arg(long)]
    pub out_ref: Option<PathBuf>,
}

pub fn cmd_simulate(args: SimulateArgs, cfg: &FileConfig) -> Result<()> {
    let amplitude = pick(args.amplitude, cfg.amplitude).unwrap_or(1.0);
    let pulse = pick(args.pulse, cfg.pulse).unwrap_or(DEFAULT_PULSE_DURATION);
    let periods = pick(args.periods, cfg.periods).unwrap_or(10);
    let sample_rate = pick(args.sample_rate, cfg.sample_rate).unwrap_or(DEFAULT_SAMPLE_RATE);
    let gain_flag = pick(args.gain, cfg.gain);
    let gain_db = pick(args.gain_db, cfg.gain_db);
    let gain = match (gain_flag, gain_db) {
        (Some(_), Some(_)) => {
            return Err(Error::Domain("--gain and --gain-db are mutually exclusive".into()))
        }
        (Some(g), None) => g,
        (None, Some(db)) => DbConvention::Intensity.from_db(db),
        (None, None) => 1.0,
    };
    let no_filters = args.no_filters || cfg.no_filters.unwrap_or(false);
    let (lowpass, highpass) = if no_filters {
        (None, None)
    } else {
        (
            Some(pick(args.lowpass, cfg.lowpass).unwrap_or(DEFAULT_LOWPASS_CUTOFF)),
            Some(pick(args.highpass, cfg.highpass).unwrap_or(DEFAULT_HIGHPASS_CUTOFF)),
        )
    };
    let noise_sigma = pick(args.noise_sigma, cfg.noise_sigma).unwrap_or(0.0);
    let seed = pick(args.seed, cfg.seed).unwrap_or(0);
    let out_rx = pick_path(args.out_rx.as_ref(), cfg.out_rx.as_ref()).unwrap_or("rx.csv".into());
    let out_ref =
        pick_path(args.out_ref.as_ref(), cfg.out_ref.as_ref()).unwrap_or("ref.csv".into());

    let hash = config_hash(&json!({
        "subcommand": "simulate",
        "amplitude": amplitude,
        "pulse": pulse,
        "periods": periods,
        "sample_rate": sample_rate,
        "gain": gain,
        "lowpass": lowpass,
        "highpass": highpass,
        "noise_sigma": noise_sigma,
        "seed": seed,
        "out_rx": out_rx.display().to_string(),
        "out_ref": out_ref.display().to_string(),
    }));

    let tx = signal::synthesize_tx(amplitude, pulse, periods, sample_rate, &SymbolSequence::default())?;
    let rx = signal::simulate_rx(&tx, gain, lowpass, highpass, noise_sigma, seed)?;
    let reference = signal::simulate_rx(&tx, 1.0, lowpass, highpass, 0.0, seed)?;
    write_waveform(&out_rx, &rx, &hash)?;
    write_waveform(&out_ref, &reference, &hash)?;
    println!(
        "simulate: {} samples at {sample_rate} Hz, gain {gain}, noise_sigma {noise_sigma} -> {}, {}",
        rx.len(),
        out_rx.display(),
        out_ref.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// bin

/// Downsample a waveform by block averaging; optionally measure gain against
/// a binned reference.
#[derive(Debug, Args)]
pub struct BinArgs {
    /// Input waveform CSV.
    #[arg(long = "in")]
    pub input: Option<PathBuf>,
    /// Samples per bin (alternative to --f-max).
    #[arg(long)]
    pub n_bin: Option<usize>,
    /// Highest frequency to keep, Hz; the bin size is fs/(2·f_max).
    #[arg(long)]
    pub f_max: Option<f64>,
    /// Spectral-line threshold (fraction of the reference peak) for the gain
    /// measurement.
    #[arg(long)]
    pub band_threshold: Option<f64>,
    /// Reference waveform CSV; prints delta_h when given. A raw reference is
    /// binned the same way first (already-binned input passes through).
    #[arg(long = "ref")]
    pub ref_wave: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn cmd_bin(args: BinArgs, cfg: &FileConfig) -> Result<()> {
    let input = require(pick_path(args.input.as_ref(), cfg.input.as_ref()), None, "in")?;
    let n_bin = pick(args.n_bin, cfg.n_bin);
    let f_max_flag = pick(args.f_max, cfg.f_max);
    if n_bin.is_some() && f_max_flag.is_some() {
        return Err(Error::Domain("--n-bin and --f-max are mutually exclusive".into()));
    }
    let band_threshold =
        pick(args.band_threshold, cfg.band_threshold).unwrap_or(DEFAULT_BAND_THRESHOLD);
    let ref_wave = pick_path(args.ref_wave.as_ref(), cfg.ref_wave.as_ref());
    let out = pick_path(args.out.as_ref(), cfg.out.as_ref()).unwrap_or("binned.csv".into());

    let wave = read_waveform(&input)?;
    let f_max = match n_bin {
        Some(0) => return Err(Error::Domain("--n-bin must be positive".into())),
        Some(n) => wave.sample_rate / (2.0 * n as f64),
        None => f_max_flag.unwrap_or(DEFAULT_F_MAX),
    };

    let hash = config_hash(&json!({
        "subcommand": "bin",
        "in": input.display().to_string(),
        "f_max": f_max,
        "band_threshold": band_threshold,
        "ref": ref_wave.as_ref().map(|p| p.display().to_string()),
        "out": out.display().to_string(),
    }));

    let binned = signal::bin(&wave, f_max)?;
    write_waveform(&out, &binned, &hash)?;
    let per_bin = (wave.sample_rate / binned.sample_rate).round();
    println!(
        "bin: {} samples -> {} bins of {per_bin} at {} Hz -> {}",
        wave.len(),
        binned.len(),
        binned.sample_rate,
        out.display()
    );
    if let Some(ref_path) = ref_wave {
        // Same binning as the input; a matching already-binned reference
        // lands on one sample per bin and passes through unchanged.
        let reference = signal::bin(&read_waveform(&ref_path)?, f_max)?;
        let rx_spectrum = signal::spectrum(&binned)?;
        let ref_spectrum = signal::spectrum(&reference)?;
        let gain = signal::delta_h(&rx_spectrum, &ref_spectrum, band_threshold)?;
        println!("delta_h = {gain} ({} dB)", DbConvention::Intensity.to_db(gain));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// synth

/// Generate a synthetic measurement dataset from a model.
#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long)]
    pub nu: Option<f64>,
    #[arg(long)]
    pub i0: Option<f64>,
    /// Point set: standard (162 points) or dense (924).
    #[arg(long)]
    pub grid: Option<String>,
    /// Multiplicative noise standard deviation, percent.
    #[arg(long)]
    pub noise_percent: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lamp_height: Option<f64>,
    #[arg(long)]
    pub aim_x: Option<f64>,
    /// Reference point x,y,z renormalized to gain 1.
    #[arg(long, allow_hyphen_values = true)]
    pub reference: Option<String>,
    /// Dataset CSV path.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Optional dataset JSON path (records with lamp pose and reference).
    #[arg(long)]
    pub out_json: Option<PathBuf>,
}

pub fn cmd_synth(args: SynthArgs, cfg: &FileConfig) -> Result<()> {
    let (model, model_desc, _) = resolve_model(
        pick_path(args.model.as_ref(), cfg.model.as_ref()),
        pick(args.preset, cfg.preset.clone()),
        pick(args.nu, cfg.nu),
        pick(args.i0, cfg.i0),
    )?;
    let grid_name = pick(args.grid, cfg.grid.clone()).unwrap_or("standard".into());
    let points = match grid_name.as_str() {
        "standard" => dataset::measurement_grid(),
        "dense" => dataset::dense_grid(),
        _ => {
            return Err(Error::Domain(format!(
                "unknown grid {grid_name:?} (expected standard or dense)"
            )))
        }
    };
    let noise_percent = pick(args.noise_percent, cfg.noise_percent).unwrap_or(0.0);
    let seed = pick(args.seed, cfg.seed).unwrap_or(0);
    let lamp = lamp_from(pick(args.lamp_height, cfg.lamp_height), pick(args.aim_x, cfg.aim_x));
    let reference = match pick(args.reference, cfg.reference.clone()) {
        Some(s) => parse_point(&s, "reference")?,
        None => REFERENCE_POINT,
    };
    let out = pick_path(args.out.as_ref(), cfg.out.as_ref()).unwrap_or("dataset.csv".into());
    let out_json = pick_path(args.out_json.as_ref(), cfg.out_json.as_ref());

    let hash = config_hash(&json!({
        "subcommand": "synth",
        "model": model_desc,
        "grid": grid_name,
        "noise_percent": noise_percent,
        "seed": seed,
        "lamp_height": lamp.height,
        "aim_x": lamp.aim.x,
        "reference": point_json(&reference),
        "out": out.display().to_string(),
        "out_json": out_json.as_ref().map(|p| p.display().to_string()),
    }));

    let ds = dataset::synthesize(model.as_ref(), &points, lamp, reference, noise_percent, seed)?;
    let mut w = create_artifact(&out, &hash, Some(ds.hash()))?;
    ds.export_csv_to(&mut w)?;
    w.flush()?;
    if let Some(json_path) = &out_json {
        let doc = json!({
            "tool": TOOL,
            "config_hash": hash,
            "dataset": ds,
        });
        let text = serde_json::to_string_pretty(&doc)
            .map_err(|e| Error::Data(format!("dataset serialization: {e}")))?;
        std::fs::write(json_path, text + "\n")?;
    }
    println!(
        "synth: {} records on the {grid_name} grid, dataset_hash {} -> {}{}",
        ds.len(),
        ds.hash(),
        out.display(),
        out_json
            .map(|p| format!(", {}", p.display()))
            .unwrap_or_default()
    );
    Ok(())
}
