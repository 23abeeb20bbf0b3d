//! Waveform synthesis, receiver-chain simulation, binning, and spectral
//! gain extraction.
//!
//! The transmitter emits a repeating Manchester-coded on-off pattern; the
//! receive chain applies a linear gain, first-order low-pass and high-pass
//! stages, and additive white Gaussian noise. Channel gain is recovered as an
//! energy-weighted mean of per-line magnitude ratios between a measurement
//! spectrum and a reference spectrum.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Default simulation sample rate, Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 250e6;
/// Default pulse (symbol) duration, seconds.
pub const DEFAULT_PULSE_DURATION: f64 = 5e-6;
/// Default receiver low-pass cutoff, Hz.
pub const DEFAULT_LOWPASS_CUTOFF: f64 = 150e3;
/// Default receiver high-pass (AC-coupling) cutoff, Hz.
pub const DEFAULT_HIGHPASS_CUTOFF: f64 = 5e3;
/// Default highest frequency preserved by binning, Hz.
pub const DEFAULT_F_MAX: f64 = 500e3;
/// Default in-band threshold for gain extraction, fraction of the peak line.
pub const DEFAULT_BAND_THRESHOLD: f64 = 0.1;
/// Default Manchester-coded symbol pattern (bits 1 0 1 1 at two chips each).
pub const DEFAULT_SYMBOL_PATTERN: [i8; 8] = [1, -1, 1, -1, 1, 1, -1, -1];

/// Uniformly sampled real signal.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub samples: Vec<f64>,
    /// Samples per second.
    pub sample_rate: f64,
}

impl Waveform {
    /// Wraps samples at a positive sample rate, rejecting non-finite values.
    pub fn new(samples: Vec<f64>, sample_rate: f64) -> Result<Self> {
        if !(sample_rate > 0.0) || !sample_rate.is_finite() {
            return Err(Error::Domain(format!(
                "sample rate {sample_rate} must be positive and finite"
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("non-finite sample at index {i}")));
        }
        Ok(Waveform { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total duration in seconds.
    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate
    }
}

/// One-sided magnitude spectrum (bins 0..=n/2 of an unnormalized DFT).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub magnitudes: Vec<f64>,
    /// Spacing between adjacent bins, Hz.
    pub frequency_resolution: f64,
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.magnitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.magnitudes.is_empty()
    }

    /// Center frequency of bin `k`, Hz.
    pub fn frequency(&self, k: usize) -> f64 {
        k as f64 * self.frequency_resolution
    }
}

/// Chip sequence of ±1 values, repeated verbatim each modulation period.
///
/// Manchester coding never produces three equal chips in a row, including
/// across the wrap-around when the pattern repeats; construction enforces
/// that run-length bound so synthesized waveforms stay free of long DC
/// stretches.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolSequence(Vec<i8>);

impl SymbolSequence {
    pub fn new(symbols: Vec<i8>) -> Result<Self> {
        if symbols.is_empty() {
            return Err(Error::Domain("symbol sequence is empty".into()));
        }
        if let Some(&bad) = symbols.iter().find(|&&s| s != 1 && s != -1) {
            return Err(Error::Domain(format!(
                "symbol values must be +1 or -1, got {bad}"
            )));
        }
        // Longest equal run, treating the sequence as cyclic.
        let n = symbols.len();
        let mut run = 1usize;
        let mut longest = 1usize;
        for i in 1..2 * n {
            if symbols[i % n] == symbols[(i - 1) % n] {
                run += 1;
                longest = longest.max(run.min(2 * n));
            } else {
                run = 1;
            }
        }
        if n > 1 && longest > 2 {
            return Err(Error::Domain(format!(
                "symbol pattern has {longest} equal chips in a row (max 2 for Manchester coding)"
            )));
        }
        Ok(SymbolSequence(symbols))
    }

    pub fn symbols(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Default for SymbolSequence {
    fn default() -> Self {
        SymbolSequence(DEFAULT_SYMBOL_PATTERN.to_vec())
    }
}

/// Synthesizes the transmitted waveform: `periods` repetitions of the symbol
/// pattern, each symbol held at ±`amplitude` for `pulse_duration` seconds.
///
/// The sample rate must put at least 10 samples in one pulse.
pub fn synthesize_tx(
    amplitude: f64,
    pulse_duration: f64,
    periods: usize,
    sample_rate: f64,
    symbols: &SymbolSequence,
) -> Result<Waveform> {
    if !(amplitude > 0.0) || !amplitude.is_finite() {
        return Err(Error::Domain(format!("amplitude {amplitude} must be positive")));
    }
    if !(pulse_duration > 0.0) || !(sample_rate > 0.0) {
        return Err(Error::Domain(
            "pulse duration and sample rate must be positive".into(),
        ));
    }
    if periods == 0 {
        return Err(Error::Domain("at least one period is required".into()));
    }
    let per_symbol = (pulse_duration * sample_rate).round();
    if per_symbol < 10.0 {
        return Err(Error::Domain(format!(
            "sample rate {sample_rate} Hz gives {per_symbol} samples per {pulse_duration} s pulse (minimum 10)"
        )));
    }
    let per_symbol = per_symbol as usize;
    let mut samples = Vec::with_capacity(periods * symbols.len() * per_symbol);
    for _ in 0..periods {
        for &s in symbols.symbols() {
            let v = amplitude * f64::from(s);
            samples.extend(std::iter::repeat(v).take(per_symbol));
        }
    }
    Ok(Waveform { samples, sample_rate })
}

/// In-place first-order low-pass (exponential moving average), zero initial
/// state: y[n] = y[n−1] + a·(x[n] − y[n−1]), a = dt/(RC + dt).
fn lowpass_inplace(samples: &mut [f64], sample_rate: f64, cutoff: f64) {
    let dt = 1.0 / sample_rate;
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff);
    let a = dt / (rc + dt);
    let mut y = 0.0;
    for x in samples.iter_mut() {
        y += a * (*x - y);
        *x = y;
    }
}

/// In-place first-order high-pass, zero initial state:
/// y[n] = a·(y[n−1] + x[n] − x[n−1]), a = RC/(RC + dt).
fn highpass_inplace(samples: &mut [f64], sample_rate: f64, cutoff: f64) {
    let dt = 1.0 / sample_rate;
    let rc = 1.0 / (2.0 * std::f64::consts::PI * cutoff);
    let a = rc / (rc + dt);
    let mut y = 0.0;
    let mut x_prev = 0.0;
    for x in samples.iter_mut() {
        y = a * (y + *x - x_prev);
        x_prev = *x;
        *x = y;
    }
}

fn check_cutoff(name: &str, cutoff: f64, sample_rate: f64) -> Result<()> {
    if !(cutoff > 0.0) || cutoff >= sample_rate / 2.0 {
        return Err(Error::Domain(format!(
            "{name} cutoff {cutoff} Hz outside (0, {}) Hz",
            sample_rate / 2.0
        )));
    }
    Ok(())
}

/// Pushes a transmitted waveform through the receive chain: linear `gain`,
/// then optional low-pass and high-pass stages (pass `None` to bypass a
/// stage), then additive white Gaussian noise of standard deviation
/// `noise_sigma` drawn from a stream seeded with `seed`.
pub fn simulate_rx(
    tx: &Waveform,
    gain: f64,
    lowpass_cutoff: Option<f64>,
    highpass_cutoff: Option<f64>,
    noise_sigma: f64,
    seed: u64,
) -> Result<Waveform> {
    if tx.is_empty() || !(tx.sample_rate > 0.0) {
        return Err(Error::Domain("input waveform is empty or has no sample rate".into()));
    }
    if !gain.is_finite() || gain < 0.0 {
        return Err(Error::Domain(format!("gain {gain} must be finite and nonnegative")));
    }
    if !noise_sigma.is_finite() || noise_sigma < 0.0 {
        return Err(Error::Domain(format!(
            "noise sigma {noise_sigma} must be finite and nonnegative"
        )));
    }
    if let Some(fc) = lowpass_cutoff {
        check_cutoff("low-pass", fc, tx.sample_rate)?;
    }
    if let Some(fc) = highpass_cutoff {
        check_cutoff("high-pass", fc, tx.sample_rate)?;
    }
    let mut samples: Vec<f64> = tx.samples.iter().map(|&x| gain * x).collect();
    if let Some(fc) = lowpass_cutoff {
        lowpass_inplace(&mut samples, tx.sample_rate, fc);
    }
    if let Some(fc) = highpass_cutoff {
        highpass_inplace(&mut samples, tx.sample_rate, fc);
    }
    if noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = Normal::new(0.0, noise_sigma)
            .map_err(|e| Error::Domain(format!("noise distribution: {e}")))?;
        for x in samples.iter_mut() {
            *x += normal.sample(&mut rng);
        }
    }
    Ok(Waveform { samples, sample_rate: tx.sample_rate })
}

/// Decimates by block averaging. The block length round(fs / (2·f_max)) keeps
/// content up to `f_max` below the decimated Nyquist rate; a trailing partial
/// block is dropped.
pub fn bin(w: &Waveform, f_max: f64) -> Result<Waveform> {
    if w.is_empty() || !(w.sample_rate > 0.0) {
        return Err(Error::Domain("input waveform is empty or has no sample rate".into()));
    }
    if !(f_max > 0.0) {
        return Err(Error::Domain(format!("f_max {f_max} must be positive")));
    }
    let n = (w.sample_rate / (2.0 * f_max)).round();
    if n < 1.0 {
        return Err(Error::Domain(format!(
            "f_max {f_max} Hz exceeds the representable band at {} Hz sampling",
            w.sample_rate
        )));
    }
    let n = n as usize;
    let blocks = w.samples.len() / n;
    if blocks == 0 {
        return Err(Error::Data(format!(
            "waveform of {} samples is shorter than one {n}-sample block",
            w.samples.len()
        )));
    }
    let samples: Vec<f64> = (0..blocks)
        .map(|b| w.samples[b * n..(b + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    Ok(Waveform { samples, sample_rate: w.sample_rate / n as f64 })
}

/// One-sided magnitude spectrum of a waveform: |X_k| for k = 0..=n/2 of the
/// unnormalized DFT, with bin spacing fs/n.
pub fn spectrum(w: &Waveform) -> Result<Spectrum> {
    let n = w.samples.len();
    if n < 2 {
        return Err(Error::Domain(format!(
            "spectrum needs at least 2 samples, got {n}"
        )));
    }
    if !(w.sample_rate > 0.0) {
        return Err(Error::Domain("waveform has no sample rate".into()));
    }
    let mut buf: Vec<Complex<f64>> = w.samples.iter().map(|&x| Complex::new(x, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let magnitudes = buf[..=n / 2].iter().map(|c| c.norm()).collect();
    Ok(Spectrum {
        magnitudes,
        frequency_resolution: w.sample_rate / n as f64,
    })
}

/// Recovers the channel gain of `rx` relative to `reference` as the
/// energy-weighted mean of per-bin magnitude ratios over the reference's
/// in-band lines (bins at or above `band_threshold` times the peak
/// magnitude). Both spectra must share binning (length and resolution).
pub fn delta_h(rx: &Spectrum, reference: &Spectrum, band_threshold: f64) -> Result<f64> {
    if rx.len() != reference.len() {
        return Err(Error::Data(format!(
            "spectra have different lengths ({} vs {})",
            rx.len(),
            reference.len()
        )));
    }
    let (r1, r2) = (rx.frequency_resolution, reference.frequency_resolution);
    if (r1 - r2).abs() > 1e-9 * r1.max(r2) {
        return Err(Error::Data(format!(
            "spectra have different frequency resolutions ({r1} vs {r2} Hz)"
        )));
    }
    if !(band_threshold > 0.0 && band_threshold < 1.0) {
        return Err(Error::Domain(format!(
            "band threshold {band_threshold} outside (0, 1)"
        )));
    }
    let peak = reference.magnitudes.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::Data(
            "degenerate reference spectrum: no positive finite peak".into(),
        ));
    }
    let floor = band_threshold * peak;
    let mut weighted = 0.0;
    let mut weight = 0.0;
    for (m, r) in rx.magnitudes.iter().zip(&reference.magnitudes) {
        if *r >= floor {
            let w = r * r;
            weighted += w * (m / r);
            weight += w;
        }
    }
    if weight == 0.0 {
        return Err(Error::Data(
            "degenerate reference spectrum: no in-band lines above threshold".into(),
        ));
    }
    Ok(weighted / weight)
}

// ---------------------------------------------------------------------------
