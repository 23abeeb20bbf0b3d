//! Run configuration: JSON config-file defaults, flag merging, value parsing,
//! and the canonical config hash embedded in every artifact.

use serde::Deserialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

use vlc_channel::basis::{ModelFamily, OrderSpec};
use vlc_channel::geometry::GridPoint;
use vlc_channel::glm::ErrorFamily;
use vlc_channel::models::{DbConvention, Region};
use vlc_channel::{Error, Result};

/// Flat key set shared by all subcommands; a config file may carry any subset
/// and each subcommand reads the keys it understands. Unknown keys are
/// rejected so typos surface instead of silently falling back to defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    // Inputs and outputs.
    pub data: Option<String>,
    pub model: Option<String>,
    pub input: Option<String>,
    #[serde(rename = "ref")]
    pub ref_wave: Option<String>,
    pub out: Option<String>,
    pub out_model: Option<String>,
    pub out_accuracy: Option<String>,
    pub out_frontier: Option<String>,
    pub out_json: Option<String>,
    pub out_rx: Option<String>,
    pub out_ref: Option<String>,
    // Model selection.
    pub family: Option<String>,
    pub error_family: Option<String>,
    pub all_error_families: Option<bool>,
    pub orders: Option<String>,
    pub preset: Option<String>,
    pub nu: Option<f64>,
    pub i0: Option<f64>,
    // Fitting and synthesis.
    pub k: Option<usize>,
    pub seed: Option<u64>,
    pub grid: Option<String>,
    pub noise_percent: Option<f64>,
    // Geometry.
    pub lamp_height: Option<f64>,
    pub aim_x: Option<f64>,
    pub reference: Option<String>,
    pub point: Option<String>,
    // Maps.
    pub region: Option<String>,
    pub heights: Option<String>,
    pub height: Option<f64>,
    pub resolution: Option<f64>,
    pub convention: Option<String>,
    pub ref_power: Option<f64>,
    pub noise_variance: Option<f64>,
    // Waveform pipeline.
    pub amplitude: Option<f64>,
    pub periods: Option<usize>,
    pub sample_rate: Option<f64>,
    pub pulse: Option<f64>,
    pub lowpass: Option<f64>,
    pub highpass: Option<f64>,
    pub no_filters: Option<bool>,
    pub noise_sigma: Option<f64>,
    pub gain: Option<f64>,
    pub gain_db: Option<f64>,
    pub n_bin: Option<usize>,
    pub f_max: Option<f64>,
    pub band_threshold: Option<f64>,
    // Receiver optics.
    pub detector_width: Option<f64>,
    pub focal_length: Option<f64>,
    pub distance: Option<f64>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Domain(format!("config file {}: {e}", path.display())))
    }
}

/// Flag value if given, else config-file value: flags win on conflict.
pub fn pick<T>(flag: Option<T>, file: Option<T>) -> Option<T> {
    flag.or(file)
}

/// As [`pick`], erroring when neither source supplies the value.
pub fn require<T>(flag: Option<T>, file: Option<T>, name: &str) -> Result<T> {
    pick(flag, file).ok_or_else(|| Error::Domain(format!("missing required --{name}")))
}

pub fn pick_path(flag: Option<&PathBuf>, file: Option<&String>) -> Option<PathBuf> {
    flag.cloned().or_else(|| file.map(PathBuf::from))
}

pub fn parse_family(s: &str) -> Result<ModelFamily> {
    match s.to_ascii_lowercase().as_str() {
        "i1" => Ok(ModelFamily::I1),
        "i2" => Ok(ModelFamily::I2),
        "i3" => Ok(ModelFamily::I3),
        _ => Err(Error::Domain(format!("unknown model family {s:?} (expected i1, i2, or i3)"))),
    }
}

pub fn parse_error_family(s: &str) -> Result<ErrorFamily> {
    match s.to_ascii_lowercase().as_str() {
        "normal" => Ok(ErrorFamily::Normal),
        "poisson" => Ok(ErrorFamily::Poisson),
        "gamma" => Ok(ErrorFamily::Gamma),
        _ => Err(Error::Domain(format!(
            "unknown error family {s:?} (expected normal, poisson, or gamma)"
        ))),
    }
}

pub fn parse_convention(s: &str) -> Result<DbConvention> {
    match s.to_ascii_lowercase().as_str() {
        "intensity" => Ok(DbConvention::Intensity),
        "amplitude" => Ok(DbConvention::Amplitude),
        _ => Err(Error::Domain(format!(
            "unknown dB convention {s:?} (expected intensity or amplitude)"
        ))),
    }
}

/// The canonical pairing of intensity model and error distribution.
pub fn natural_error_family(family: ModelFamily) -> ErrorFamily {
    match family {
        ModelFamily::I1 => ErrorFamily::Gamma,
        ModelFamily::I2 => ErrorFamily::Poisson,
        ModelFamily::I3 => ErrorFamily::Normal,
    }
}

/// The published 12-term configuration for each family.
pub fn default_orders(family: ModelFamily) -> OrderSpec {
    let (p, beta_max, r) = match family {
        ModelFamily::I1 => (4, 4, 0),
        ModelFamily::I2 | ModelFamily::I3 => (3, 2, 1),
    };
    OrderSpec::new(p, beta_max, r).expect("built-in orders are valid")
}

fn parse_f64_list(s: &str, name: &str, want: Option<usize>) -> Result<Vec<f64>> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| {
                Error::Domain(format!("--{name} component {part:?} is not a number"))
            })
        })
        .collect::<Result<_>>()?;
    if let Some(n) = want {
        if vals.len() != n {
            return Err(Error::Domain(format!(
                "--{name} expects {n} comma-separated values, got {}",
                vals.len()
            )));
        }
    }
    if vals.is_empty() {
        return Err(Error::Domain(format!("--{name} must not be empty")));
    }
    Ok(vals)
}

/// "x,y,z" → point.
pub fn parse_point(s: &str, name: &str) -> Result<GridPoint> {
    let v = parse_f64_list(s, name, Some(3))?;
    Ok(GridPoint::new(v[0], v[1], v[2]))
}

/// "x0,x1,y0,y1" → region.
pub fn parse_region(s: &str) -> Result<Region> {
    let v = parse_f64_list(s, "region", Some(4))?;
    Ok(Region { x: (v[0], v[1]), y: (v[2], v[3]) })
}

/// "h1,h2,…" → heights.
pub fn parse_heights(s: &str) -> Result<Vec<f64>> {
    parse_f64_list(s, "heights", None)
}

/// "p,beta_max[,r]" → validated orders (r defaults to 0).
pub fn parse_orders(s: &str) -> Result<OrderSpec> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 2 && parts.len() != 3 {
        return Err(Error::Domain(format!(
            "--orders expects p,beta_max[,r], got {s:?}"
        )));
    }
    let nums: Vec<u32> = parts
        .iter()
        .map(|part| {
            part.parse::<u32>()
                .map_err(|_| Error::Domain(format!("--orders component {part:?} is not an integer")))
        })
        .collect::<Result<_>>()?;
    let r = if nums.len() == 3 { nums[2] } else { 0 };
    OrderSpec::new(nums[0], nums[1], r)
}

/// SHA-256 over the compact canonical JSON of the resolved configuration.
/// serde_json orders object keys, so equal configs hash equally regardless of
/// how they were supplied.
pub fn config_hash(resolved: &serde_json::Value) -> String {
    let text = serde_json::to_string(resolved).expect("resolved config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}
