use std::path::Path;

use super::{Waveform, SAMPLE_RATE};
use crate::error::{Error, Result};

const FULL_SCALE: f64 = 32768.0;

fn format_err(e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

/// Read a RIFF PCM16 mono 16 kHz file. Anything else is a format error
/// naming the offending header field.
pub fn read_wav(path: impl AsRef<Path>) -> Result<Waveform> {
    let mut reader = hound::WavReader::open(path).map_err(format_err)?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(Error::Format(format!("channels={}", spec.channels)));
    }
    if spec.sample_rate != SAMPLE_RATE {
        return Err(Error::Format(format!("sample_rate={}", spec.sample_rate)));
    }
    if spec.sample_format != hound::SampleFormat::Int {
        return Err(Error::Format("sample_format=float".into()));
    }
    if spec.bits_per_sample != 16 {
        return Err(Error::Format(format!("bits_per_sample={}", spec.bits_per_sample)));
    }
    let samples = reader
        .samples::<i16>()
        .map(|s| s.map(|v| v as f64 / FULL_SCALE))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(format_err)?;
    Waveform::new(samples)
}

/// Write as PCM16. Samples are clamped to `[-1, 1]` and rounded, so the
/// roundtrip error is at most one quantization step.
pub fn write_wav(path: impl AsRef<Path>, w: &Waveform) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: SAMPLE_RATE,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(format_err)?;
    for &s in w.samples() {
        let q = (s.clamp(-1.0, 1.0) * FULL_SCALE).round().clamp(-FULL_SCALE, FULL_SCALE - 1.0);
        writer.write_sample(q as i16).map_err(format_err)?;
    }
    writer.finalize().map_err(format_err)
}
