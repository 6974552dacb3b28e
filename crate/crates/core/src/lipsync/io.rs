//! PCM decoding, WAV input and CSV output for offline lip-sync.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stream::{LipsyncStream, VisemeFrame};
use super::{LipsyncConfig, LipsyncError, MIN_SAMPLE_RATE_HZ};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcmFormat {
    /// Signed 16-bit little-endian.
    S16le,
    /// IEEE 754 32-bit float little-endian.
    F32le,
}

impl std::str::FromStr for PcmFormat {
    type Err = LipsyncError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "s16le" => Ok(PcmFormat::S16le),
            "f32le" => Ok(PcmFormat::F32le),
            other => Err(LipsyncError::UnsupportedFormat(other.to_string())),
        }
    }
}

/// Decodes raw mono PCM bytes into samples in `[-1, 1]`.
pub fn decode_pcm(bytes: &[u8], format: PcmFormat) -> Result<Vec<f64>, LipsyncError> {
    match format {
        PcmFormat::S16le => {
            if !bytes.len().is_multiple_of(2) {
                return Err(LipsyncError::UnsupportedFormat(format!(
                    "s16le payload of {} bytes is not a whole number of samples",
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(2)
                .map(|b| f64::from(i16::from_le_bytes([b[0], b[1]])) / 32768.0)
                .collect())
        }
        PcmFormat::F32le => {
            if !bytes.len().is_multiple_of(4) {
                return Err(LipsyncError::UnsupportedFormat(format!(
                    "f32le payload of {} bytes is not a whole number of samples",
                    bytes.len()
                )));
            }
            Ok(bytes
                .chunks_exact(4)
                .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])).clamp(-1.0, 1.0))
                .collect())
        }
    }
}

/// Runs the whole lip-sync pipeline over one PCM buffer.
///
/// The buffer's own sample rate replaces the configured one; it still has to
/// be at least 16 kHz.
pub fn analyze_pcm(
    bytes: &[u8],
    format: PcmFormat,
    sample_rate_hz: u32,
    config: &LipsyncConfig,
) -> Result<Vec<VisemeFrame>, LipsyncError> {
    if sample_rate_hz < MIN_SAMPLE_RATE_HZ {
        return Err(LipsyncError::SampleRateTooLow(sample_rate_hz));
    }
    let samples = decode_pcm(bytes, format)?;
    let mut stream = LipsyncStream::new(config.clone().with_sample_rate(sample_rate_hz))?;
    stream.process(&samples, sample_rate_hz)
}

/// Reads a 16-bit integer or 32-bit float WAV file, averaging channels to mono.
pub fn read_wav(path: impl AsRef<Path>) -> Result<(Vec<f64>, u32), LipsyncError> {
    let path = path.as_ref();
    let reader = hound::WavReader::open(path).map_err(|e| LipsyncError::Io(format!("{}: {e}", path.display())))?;
    let spec = reader.spec();
    let channels = usize::from(spec.channels.max(1));
    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Int, 16) => reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| f64::from(v) / 32768.0))
            .collect::<Result<_, _>>(),
        (hound::SampleFormat::Float, 32) => reader
            .into_samples::<f32>()
            .map(|s| s.map(f64::from))
            .collect::<Result<_, _>>(),
        (format, bits) => {
            return Err(LipsyncError::UnsupportedFormat(format!(
                "{bits}-bit {format:?} WAV (expected 16-bit PCM or 32-bit float)"
            )))
        }
    }
    .map_err(|e| LipsyncError::Io(format!("{}: {e}", path.display())))?;

    let mono = interleaved
        .chunks(channels)
        .map(|frame| frame.iter().sum::<f64>() / frame.len() as f64)
        .collect();
    Ok((mono, spec.sample_rate))
}

/// Writes `t_ms,kiss,lipsPressed,mouthOpen` rows with six decimals.
pub fn write_csv(frames: &[VisemeFrame], mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "t_ms,kiss,lipsPressed,mouthOpen")?;
    for f in frames {
        writeln!(
            out,
            "{:.6},{:.6},{:.6},{:.6}",
            f.t_ms, f.weights.kiss, f.weights.lips_pressed, f.weights.mouth_open
        )?;
    }
    Ok(())
}
