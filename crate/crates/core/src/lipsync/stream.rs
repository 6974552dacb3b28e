use serde::{Deserialize, Serialize};

use super::bands::{band_energies, smooth, BandEnergies};
use super::spectrum::SpectrumAnalyzer;
use super::{LipsyncConfig, LipsyncError, VisemeWeights};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VisemeFrame {
    /// Time of the analysis frame's center, from the start of the stream.
    pub t_ms: f64,
    #[serde(flatten)]
    pub weights: VisemeWeights,
}

/// Incremental lip-sync over a mono PCM stream.
///
/// Samples may arrive in chunks of any size. One [`VisemeFrame`] is emitted
/// each time a full analysis frame is available, then the window advances by
/// one hop.
#[derive(Debug)]
pub struct LipsyncStream {
    config: LipsyncConfig,
    analyzer: SpectrumAnalyzer,
    buffer: Vec<f64>,
    /// Absolute index of `buffer[0]` in the stream.
    position: u64,
    smoothed: BandEnergies,
}

impl LipsyncStream {
    pub fn new(config: LipsyncConfig) -> Result<Self, LipsyncError> {
        config.validate()?;
        Ok(Self {
            analyzer: SpectrumAnalyzer::new(config.frame_size),
            buffer: Vec::with_capacity(config.frame_size * 2),
            position: 0,
            smoothed: BandEnergies::default(),
            config,
        })
    }

    pub fn config(&self) -> &LipsyncConfig {
        &self.config
    }

    pub fn smoothed(&self) -> BandEnergies {
        self.smoothed
    }

    /// Feeds a chunk of samples recorded at `sample_rate_hz`.
    pub fn process(&mut self, samples: &[f64], sample_rate_hz: u32) -> Result<Vec<VisemeFrame>, LipsyncError> {
        if sample_rate_hz != self.config.sample_rate_hz {
            return Err(LipsyncError::SampleRateMismatch {
                expected: self.config.sample_rate_hz,
                actual: sample_rate_hz,
            });
        }
        self.buffer.extend_from_slice(samples);

        let frame = self.config.frame_size;
        let hop = self.config.hop;
        let rate = f64::from(self.config.sample_rate_hz);
        let mut out = Vec::new();
        let mut start = 0;
        while self.buffer.len() - start >= frame {
            let mags = self.analyzer.magnitudes(&self.buffer[start..start + frame])?;
            let energies = band_energies(&mags, self.config.sample_rate_hz, &self.config);
            self.smoothed = smooth(&self.smoothed, &energies, self.config.smoothing);
            let center = self.position + (start + frame / 2) as u64;
            out.push(VisemeFrame {
                t_ms: center as f64 * 1000.0 / rate,
                weights: self.config.visemes.apply(&self.smoothed),
            });
            start += hop;
        }
        self.buffer.drain(..start);
        self.position += start as u64;
        Ok(out)
    }
}
