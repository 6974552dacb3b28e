//! Speech-driven mouth shapes from frequency-band energies.
//!
//! Audio is cut into overlapping Hann-windowed frames. Each frame's spectrum
//! is reduced to four band energies, smoothed over time, and mapped onto the
//! three mouth blend shapes `kiss`, `lipsPressed` and `mouthOpen`:
//!
//! ```text
//! PCM ─▶ frame/hop ─▶ |DFT| ─▶ 4 band energies ─▶ smooth ─▶ visemes
//! ```

mod bands;
mod io;
mod spectrum;
mod stream;

pub use bands::{band_energies, energies_to_visemes, smooth, to_dbfs, BandEnergies, VisemeParams};
pub use io::{analyze_pcm, decode_pcm, read_wav, write_csv, PcmFormat};
pub use spectrum::{spectrum, AudioFrame, SpectrumAnalyzer};
pub use stream::{LipsyncStream, VisemeFrame};

use std::path::Path;

use serde::{Deserialize, Serialize};

/// Lowest sample rate whose Nyquist frequency leaves room for the top band.
pub const MIN_SAMPLE_RATE_HZ: u32 = 16_000;

/// The three lip-sync blend shapes, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct VisemeWeights {
    pub kiss: f64,
    pub lips_pressed: f64,
    pub mouth_open: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LipsyncConfig {
    pub frame_size: usize,
    pub hop: usize,
    pub sample_rate_hz: u32,
    /// Half-open `[low, high)` frequency ranges in Hz.
    pub bands: [[f64; 2]; 4],
    pub smoothing: f64,
    pub floor_db: f64,
    pub ceiling_db: f64,
    /// Frames whose loudest band is below this level map to zero energy.
    pub gate_db: f64,
    /// Spectrum magnitude that corresponds to 0 dBFS: a full-scale sine seen
    /// through a Hann window with 1/N scaling peaks at 0.5 × 0.5.
    pub full_scale_magnitude: f64,
    pub visemes: VisemeParams,
}

impl Default for LipsyncConfig {
    fn default() -> Self {
        Self {
            frame_size: 1024,
            hop: 512,
            sample_rate_hz: 44_100,
            bands: [[0.0, 500.0], [500.0, 700.0], [700.0, 3000.0], [3000.0, 6000.0]],
            smoothing: 0.6,
            floor_db: -60.0,
            ceiling_db: -10.0,
            gate_db: -60.0,
            full_scale_magnitude: 0.25,
            visemes: VisemeParams::default(),
        }
    }
}

impl LipsyncConfig {
    pub fn with_sample_rate(mut self, sample_rate_hz: u32) -> Self {
        self.sample_rate_hz = sample_rate_hz;
        self
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, LipsyncError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| LipsyncError::Io(format!("{}: {e}", path.display())))?;
        let config: Self =
            serde_json::from_str(&text).map_err(|e| LipsyncError::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), LipsyncError> {
        if self.sample_rate_hz < MIN_SAMPLE_RATE_HZ {
            return Err(LipsyncError::SampleRateTooLow(self.sample_rate_hz));
        }
        if self.frame_size < 2 || !self.frame_size.is_multiple_of(2) {
            return Err(LipsyncError::Config(format!("frame_size {} must be even", self.frame_size)));
        }
        if self.hop == 0 || self.hop > self.frame_size {
            return Err(LipsyncError::Config(format!("hop {} must be in 1..=frame_size", self.hop)));
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return Err(LipsyncError::Config("smoothing must be in [0, 1)".into()));
        }
        if self.ceiling_db <= self.floor_db {
            return Err(LipsyncError::Config("ceiling_db must exceed floor_db".into()));
        }
        let nyquist = f64::from(self.sample_rate_hz) / 2.0;
        if self.bands.iter().any(|[lo, hi]| lo >= hi || *hi > nyquist) {
            return Err(LipsyncError::Config(format!(
                "bands must be increasing ranges below {nyquist} Hz"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LipsyncError {
    #[error("expected a frame of {expected} samples, got {actual}")]
    FrameLength { expected: usize, actual: usize },
    #[error("sample rate {0} Hz is below the supported minimum of 16000 Hz")]
    SampleRateTooLow(u32),
    #[error("sample rate {actual} Hz does not match the stream's {expected} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("unsupported audio format: {0}")]
    UnsupportedFormat(String),
    #[error("invalid lip-sync configuration: {0}")]
    Config(String),
    #[error("{0}")]
    Io(String),
}
