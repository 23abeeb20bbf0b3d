//! Road-frame geometry of the lamp/receiver setup.
//!
//! The lamp sits at `(0, 0, h)` with its optical axis aimed at a ground point
//! ahead of it. Receiver positions are given in road coordinates (x along the
//! road, y lateral, z height) and converted to the lamp-centric spherical
//! coordinates (α, β, d) every intensity model is expressed in.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default lamp height above ground, meters.
pub const DEFAULT_LAMP_HEIGHT_M: f64 = 2.83;

/// Default ground point of maximum irradiance, meters ahead of the lamp base.
pub const DEFAULT_AIM_X_M: f64 = 14.0;

/// The 0 dB reference position: 4 m ahead, 0.75 m lateral, 1.35 m high.
pub const REFERENCE_POINT: GridPoint = GridPoint {
    x: 4.0,
    y: 0.75,
    z: 1.35,
};

/// A receiver position in road coordinates, meters.
///
/// `x` runs along the road away from the lamp base, `y` is lateral (positive
/// into the road; the lamp is at y = 0), `z` is height above ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl GridPoint {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        GridPoint { x, y, z }
    }
}

/// Lamp placement: base at the origin, head at `height`, axis aimed at a
/// ground point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LampPose {
    /// Lamp height above ground, meters. Must be positive.
    pub height: f64,
    /// Ground point of maximum irradiance. Must differ from the lamp position.
    pub aim: GridPoint,
}

impl Default for LampPose {
    fn default() -> Self {
        LampPose {
            height: DEFAULT_LAMP_HEIGHT_M,
            aim: GridPoint::new(DEFAULT_AIM_X_M, 0.0, 0.0),
        }
    }
}

impl LampPose {
    /// Lamp position in road coordinates.
    pub fn position(&self) -> GridPoint {
        GridPoint::new(0.0, 0.0, self.height)
    }
}

/// Lamp-centric spherical coordinates of a receiver.
///
/// `alpha` is the elevation of the lamp→receiver ray below the horizontal
/// plane (positive when the receiver is below the lamp, which holds for every
/// measurement position), `beta` the azimuth from the road axis
/// (sign-symmetric), `d` the Euclidean lamp→receiver distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalCoord {
    /// Elevation, radians, |alpha| < π/2.
    pub alpha: f64,
    /// Azimuth, radians, |beta| < π/2 for all valid (x > 0) positions.
    pub beta: f64,
    /// Distance, meters, > 0.
    pub d: f64,
}

/// Converts a road-frame position to lamp-centric spherical coordinates.
///
/// d is the Euclidean distance, α = arcsin((h − z)/d), β = arctan(y/x).
/// β is only meaningful ahead of the lamp, so x ≤ 0 is rejected rather than
/// silently wrapped.
pub fn to_spherical(point: &GridPoint, lamp: &LampPose) -> Result<SphericalCoord> {
    let dz = lamp.height - point.z;
    let d = (point.x * point.x + point.y * point.y + dz * dz).sqrt();
    if d <= 0.0 || !d.is_finite() {
        return Err(Error::Domain(format!(
            "point ({}, {}, {}) coincides with the lamp position",
            point.x, point.y, point.z
        )));
    }
    if point.x <= 0.0 {
        return Err(Error::Domain(format!(
            "azimuth undefined behind the lamp plane: x = {} must be positive",
            point.x
        )));
    }
    Ok(SphericalCoord {
        alpha: (dz / d).asin(),
        beta: point.y.atan2(point.x),
        d,
    })
}

/// Angle φ between the lamp→point ray and the lamp's optical axis
/// (lamp→aim ray), radians in [0, π].
pub fn irradiance_angle(point: &GridPoint, lamp: &LampPose) -> Result<f64> {
    let pos = lamp.position();
    let v = [point.x - pos.x, point.y - pos.y, point.z - pos.z];
    let a = [
        lamp.aim.x - pos.x,
        lamp.aim.y - pos.y,
        lamp.aim.z - pos.z,
    ];
    let nv = norm3(&v);
    let na = norm3(&a);
    if nv <= 0.0 || !nv.is_finite() {
        return Err(Error::Domain(
            "irradiance angle undefined at the lamp position".into(),
        ));
    }
    if na <= 0.0 || !na.is_finite() {
        return Err(Error::Domain(
            "lamp aim point coincides with the lamp position".into(),
        ));
    }
    let cos_phi = (dot3(&v, &a) / (nv * na)).clamp(-1.0, 1.0);
    Ok(cos_phi.acos())
}

fn dot3(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm3(v: &[f64; 3]) -> f64 {
    dot3(v, v).sqrt()
}

// ---------------------------------------------------------------------------
