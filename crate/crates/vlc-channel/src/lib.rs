//! Measurement-driven characterization of a traffic-light-to-vehicle visible
//! light communication channel.
//!
//! The crate covers the full pipeline used to turn raw receiver waveforms into
//! calibrated intensity models and link-budget maps:
//!
//! * [`signal`] — Manchester-OOK test waveform synthesis, simulated reception,
//!   binning, spectra, and extraction of the normalized channel gain ΔH.
//! * [`geometry`] — road-frame grid positions to lamp-centric spherical
//!   coordinates (α, β, d) and the irradiance angle φ.
//! * [`basis`] — truncated monomial bases in (α, β², d) and design matrices.
//! * [`glm`] — IRLS fitting for Normal/Poisson/Gamma families with canonical
//!   links, k-fold cross-validation, and order sweeps.
//! * [`models`] — the Lambertian baseline, error metrics, and intensity maps.
//! * [`perf`] — noise estimation, SNR/BER, and the receiver-FOV reflection
//!   exclusion geometry.
//! * [`dataset`] — measurement ingestion, validation, reference normalization,
//!   and synthetic data generation.
//! * [`presets`] — built-in 12-term reference coefficient sets.
//!
//! Angles are radians, distances meters, and ΔH is a linear intensity ratio
//! (1 at the reference point) unless a dB variant is named explicitly.

pub mod basis;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod glm;
pub mod models;
pub mod perf;
pub mod presets;
pub mod signal;

pub use error::{Error, Result};
