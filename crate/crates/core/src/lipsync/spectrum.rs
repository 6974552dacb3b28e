use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::LipsyncError;

#[derive(Debug, Clone, PartialEq)]
pub struct AudioFrame {
    pub samples: Vec<f64>,
    pub sample_rate_hz: u32,
}

/// Hann-windowed magnitude spectrum with a cached FFT plan.
pub struct SpectrumAnalyzer {
    frame_size: usize,
    window: Vec<f64>,
    fft: Arc<dyn Fft<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl std::fmt::Debug for SpectrumAnalyzer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectrumAnalyzer").field("frame_size", &self.frame_size).finish()
    }
}

impl SpectrumAnalyzer {
    pub fn new(frame_size: usize) -> Self {
        let window = (0..frame_size)
            .map(|n| 0.5 - 0.5 * (2.0 * PI * n as f64 / frame_size as f64).cos())
            .collect();
        Self {
            frame_size,
            window,
            fft: FftPlanner::new().plan_fft_forward(frame_size),
            scratch: vec![Complex::default(); frame_size],
        }
    }

    pub fn frame_size(&self) -> usize {
        self.frame_size
    }

    /// Returns `frame_size / 2 + 1` magnitudes, each divided by `frame_size`.
    /// Bin `k` sits at `k * sample_rate / frame_size` Hz.
    pub fn magnitudes(&mut self, samples: &[f64]) -> Result<Vec<f64>, LipsyncError> {
        if samples.len() != self.frame_size {
            return Err(LipsyncError::FrameLength {
                expected: self.frame_size,
                actual: samples.len(),
            });
        }
        for ((slot, x), w) in self.scratch.iter_mut().zip(samples).zip(&self.window) {
            *slot = Complex::new(x * w, 0.0);
        }
        self.fft.process(&mut self.scratch);
        let n = self.frame_size as f64;
        Ok(self.scratch[..=self.frame_size / 2].iter().map(|c| c.norm() / n).collect())
    }
}

/// One-shot convenience over [`SpectrumAnalyzer`].
pub fn spectrum(frame: &AudioFrame, frame_size: usize) -> Result<Vec<f64>, LipsyncError> {
    SpectrumAnalyzer::new(frame_size).magnitudes(&frame.samples)
}
