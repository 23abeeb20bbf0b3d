//! Artifact I/O: provenance comment headers, waveform CSV files, and small
//! formatting helpers shared by the subcommands.

use std::io::{BufRead, Write};
use std::path::Path;

use vlc_channel::signal::Waveform;
use vlc_channel::{Error, Result};

pub const TOOL: &str = concat!("vlcchan ", env!("CARGO_PKG_VERSION"));

/// Leading `#` comment block carried by every CSV artifact: tool version,
/// resolved-config hash, and the dataset hash when one is in play.
pub fn provenance_header(config_hash: &str, dataset_hash: Option<&str>) -> String {
    let mut header = format!("# tool: {TOOL}\n# config_hash: {config_hash}\n");
    if let Some(hash) = dataset_hash {
        header.push_str(&format!("# dataset_hash: {hash}\n"));
    }
    header
}

/// Opens `path` and writes the provenance block, returning the writer for
/// the tabular payload.
pub fn create_artifact(
    path: &Path,
    config_hash: &str,
    dataset_hash: Option<&str>,
) -> Result<std::io::BufWriter<std::fs::File>> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(provenance_header(config_hash, dataset_hash).as_bytes())?;
    Ok(out)
}

/// One sample per row under a `value` header; the sample rate rides in a
/// comment so binned outputs stay self-describing.
pub fn write_waveform(path: &Path, wave: &Waveform, config_hash: &str) -> Result<()> {
    let mut out = create_artifact(path, config_hash, None)?;
    writeln!(out, "# sample_rate_hz: {:?}", wave.sample_rate)?;
    writeln!(out, "value")?;
    for v in &wave.samples {
        writeln!(out, "{v:?}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_waveform(path: &Path) -> Result<Waveform> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
    let mut sample_rate = None;
    let mut samples = Vec::new();
    let mut saw_header = false;
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(rate) = comment.trim().strip_prefix("sample_rate_hz:") {
                sample_rate = Some(rate.trim().parse::<f64>().map_err(|_| {
                    Error::Data(format!("{} line {}: bad sample rate", path.display(), i + 1))
                })?);
            }
            continue;
        }
        if !saw_header {
            if line != "value" {
                return Err(Error::Data(format!(
                    "{} line {}: expected header \"value\", got {line:?}",
                    path.display(),
                    i + 1
                )));
            }
            saw_header = true;
            continue;
        }
        samples.push(line.parse::<f64>().map_err(|_| {
            Error::Data(format!("{} line {}: {line:?} is not a number", path.display(), i + 1))
        })?);
    }
    let sample_rate = sample_rate.ok_or_else(|| {
        Error::Data(format!("{}: missing # sample_rate_hz comment", path.display()))
    })?;
    Waveform::new(samples, sample_rate)
}

/// Empty string for missing cells so undefined map entries stay visibly blank.
pub fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}
