use serde::{Deserialize, Serialize};

use super::{LipsyncConfig, VisemeWeights};
use crate::expression::clamp01;

/// Normalized energies of the four analysis bands, low to high.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct BandEnergies(pub [f64; 4]);

/// Level of a spectrum magnitude relative to full scale.
pub fn to_dbfs(magnitude: f64, full_scale_magnitude: f64) -> f64 {
    20.0 * (magnitude / full_scale_magnitude).log10()
}

/// Mean magnitude per band, converted to dBFS and mapped linearly from
/// `[floor_db, ceiling_db]` onto `[0, 1]`.
///
/// `magnitudes` is a one-sided spectrum (`N / 2 + 1` bins). A frame whose
/// loudest band is under the gate level reads as silence.
pub fn band_energies(magnitudes: &[f64], sample_rate_hz: u32, cfg: &LipsyncConfig) -> BandEnergies {
    let n = (magnitudes.len().saturating_sub(1) * 2).max(1) as f64;
    let bin_hz = f64::from(sample_rate_hz) / n;

    let levels = cfg.bands.map(|[lo, hi]| {
        let (sum, count) = magnitudes
            .iter()
            .enumerate()
            .filter(|(k, _)| {
                let f = *k as f64 * bin_hz;
                f >= lo && f < hi
            })
            .fold((0.0, 0usize), |(s, c), (_, m)| (s + m, c + 1));
        if count == 0 {
            f64::NEG_INFINITY
        } else {
            to_dbfs(sum / count as f64, cfg.full_scale_magnitude)
        }
    });

    if levels.iter().all(|&db| db < cfg.gate_db) {
        return BandEnergies::default();
    }
    let span = cfg.ceiling_db - cfg.floor_db;
    BandEnergies(levels.map(|db| {
        if db.is_finite() {
            clamp01((db - cfg.floor_db) / span)
        } else {
            0.0
        }
    }))
}

/// `alpha * previous + (1 - alpha) * current`, per band.
pub fn smooth(previous: &BandEnergies, current: &BandEnergies, alpha: f64) -> BandEnergies {
    let mut out = [0.0; 4];
    for (i, o) in out.iter_mut().enumerate() {
        *o = alpha * previous.0[i] + (1.0 - alpha) * current.0[i];
    }
    BandEnergies(out)
}

/// Constants of the energy-to-viseme mapping.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VisemeParams {
    /// `kiss` grows as the 700-3000 Hz band drops below this level.
    pub kiss_center: f64,
    pub kiss_gain: f64,
    /// Below this 500-700 Hz energy, `kiss` fades in linearly.
    pub kiss_onset: f64,
    pub lips_pressed_gain: f64,
    pub mouth_open_gain: f64,
}

impl Default for VisemeParams {
    fn default() -> Self {
        Self {
            kiss_center: 0.5,
            kiss_gain: 2.0,
            kiss_onset: 0.2,
            lips_pressed_gain: 3.0,
            mouth_open_gain: 0.8,
        }
    }
}

impl VisemeParams {
    pub fn apply(&self, e: &BandEnergies) -> VisemeWeights {
        let [_, e2, e3, e4] = e.0;
        let onset = if e2 < self.kiss_onset { e2 / self.kiss_onset } else { 1.0 };
        VisemeWeights {
            kiss: clamp01((self.kiss_center - e3) * self.kiss_gain * onset),
            lips_pressed: clamp01(self.lips_pressed_gain * e4),
            mouth_open: clamp01(self.mouth_open_gain * (e2 - e4)),
        }
    }
}

/// Maps band energies to mouth shapes with the default [`VisemeParams`].
pub fn energies_to_visemes(e: &BandEnergies) -> VisemeWeights {
    VisemeParams::default().apply(e)
}
