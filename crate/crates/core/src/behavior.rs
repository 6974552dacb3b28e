//! Nonverbal behavior: head nods while listening and speaking, head shakes
//! on negation words, and gaze directed at the user's face.
//!
//! Schedules are plain lists of timed events, a small analogue of BML
//! `<head>` and `<gaze>` commands. All randomness (nod jitter) comes from a
//! seeded ChaCha generator, so a given seed always yields the same schedule.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordTiming {
    pub word: String,
    pub start_ms: f64,
    pub end_ms: f64,
    pub index: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BehaviorKind {
    HeadNod,
    HeadShake,
    Gaze,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Gaze {
    pub yaw_rad: f64,
    pub pitch_rad: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviorEvent {
    pub kind: BehaviorKind,
    pub start_ms: f64,
    pub end_ms: f64,
    pub amplitude: f64,
    /// Present exactly when `kind` is [`BehaviorKind::Gaze`].
    pub gaze_target: Option<Gaze>,
}

impl BehaviorEvent {
    fn new(kind: BehaviorKind, start_ms: f64, end_ms: f64, amplitude: f64) -> Self {
        Self {
            kind,
            start_ms,
            end_ms,
            amplitude,
            gaze_target: None,
        }
    }

    pub fn gaze(target: Gaze, start_ms: f64, end_ms: f64) -> Self {
        Self {
            kind: BehaviorKind::Gaze,
            start_ms,
            end_ms,
            amplitude: 1.0,
            gaze_target: Some(target),
        }
    }

    fn overlaps(&self, start_ms: f64, end_ms: f64) -> bool {
        self.start_ms < end_ms && start_ms < self.end_ms
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BehaviorSchedule {
    pub events: Vec<BehaviorEvent>,
    pub total_ms: f64,
}

impl BehaviorSchedule {
    fn from_events(mut events: Vec<BehaviorEvent>, total_ms: f64) -> Self {
        events.sort_by(|a, b| a.start_ms.total_cmp(&b.start_ms));
        Self { events, total_ms }
    }

    /// Adds an event and keeps the list ordered by start time.
    pub fn insert(&mut self, event: BehaviorEvent) {
        let at = self.events.partition_point(|e| e.start_ms <= event.start_ms);
        self.events.insert(at, event);
    }

    pub fn count(&self, kind: BehaviorKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    pub fn of_kind(&self, kind: BehaviorKind) -> impl Iterator<Item = &BehaviorEvent> {
        self.events.iter().filter(move |e| e.kind == kind)
    }
}

/// Timing and amplitude defaults for the planners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BehaviorConfig {
    /// Duration of one character-unit when estimating word timings.
    pub unit_ms: f64,
    pub shake_padding_ms: f64,
    pub shake_amplitude: f64,
    pub opening_nod_ms: f64,
    pub opening_nod_amplitude: f64,
    pub nod_duration_ms: f64,
    pub speaking_nod_period_ms: f64,
    pub speaking_nod_jitter_ms: f64,
    pub speaking_nod_amplitude: f64,
    pub listening_nod_period_ms: f64,
    pub listening_nod_jitter_ms: f64,
    pub listening_nod_amplitude: f64,
}

impl Default for BehaviorConfig {
    fn default() -> Self {
        Self {
            unit_ms: 55.0,
            shake_padding_ms: 120.0,
            shake_amplitude: 0.6,
            opening_nod_ms: 300.0,
            opening_nod_amplitude: 0.2,
            nod_duration_ms: 400.0,
            speaking_nod_period_ms: 2000.0,
            speaking_nod_jitter_ms: 500.0,
            speaking_nod_amplitude: 0.15,
            listening_nod_period_ms: 1500.0,
            listening_nod_jitter_ms: 300.0,
            listening_nod_amplitude: 0.12,
        }
    }
}

/// Splits reply text into words, trimming surrounding punctuation but
/// keeping inner apostrophes (`"Don't"` stays one word).
pub fn words(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| {
            w.replace('\u{2019}', "'")
                .trim_matches(|c: char| !c.is_alphanumeric())
                .to_string()
        })
        .filter(|w| !w.is_empty())
        .collect()
}

/// `no`, `not`, and anything ending in `n't`, case-insensitively.
pub fn is_negation(word: &str) -> bool {
    let w = word.to_lowercase();
    w == "no" || w == "not" || w.ends_with("n't")
}

/// Lays words out back to back, giving each `len + 1` units of `unit_ms`.
pub fn estimate_word_timings(text: &str, unit_ms: f64) -> Vec<WordTiming> {
    assert!(unit_ms > 0.0, "unit_ms must be positive");
    let mut t = 0.0;
    words(text)
        .into_iter()
        .enumerate()
        .map(|(index, word)| {
            let units = (word.chars().count() + 1) as f64;
            let start_ms = t;
            t += units * unit_ms;
            WordTiming {
                word,
                start_ms,
                end_ms: t,
                index,
            }
        })
        .collect()
}

/// Plans head motion for the agent's own speech.
///
/// Every negation word gets one head shake spanning the word padded on both
/// sides. Nods open the utterance and then recur at a jittered period; any
/// nod that would overlap a shake is dropped.
pub fn plan_speaking(text: &str, timings: &[WordTiming], seed: u64, cfg: &BehaviorConfig) -> BehaviorSchedule {
    debug_assert_eq!(
        words(text),
        timings.iter().map(|t| t.word.clone()).collect::<Vec<_>>(),
        "timings must cover the text's words in order"
    );
    let total = timings.last().map_or(0.0, |t| t.end_ms);
    if total <= 0.0 {
        return BehaviorSchedule::default();
    }

    let shakes: Vec<BehaviorEvent> = timings
        .iter()
        .filter(|t| is_negation(&t.word))
        .map(|t| {
            BehaviorEvent::new(
                BehaviorKind::HeadShake,
                (t.start_ms - cfg.shake_padding_ms).max(0.0),
                (t.end_ms + cfg.shake_padding_ms).min(total),
                cfg.shake_amplitude,
            )
        })
        .collect();
    let clear = |start: f64, end: f64| !shakes.iter().any(|s| s.overlaps(start, end));

    let mut events = Vec::new();
    let opening_end = cfg.opening_nod_ms.min(total);
    if clear(0.0, opening_end) {
        events.push(BehaviorEvent::new(
            BehaviorKind::HeadNod,
            0.0,
            opening_end,
            cfg.opening_nod_amplitude,
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut start = 0.0;
    loop {
        start += jittered(&mut rng, cfg.speaking_nod_period_ms, cfg.speaking_nod_jitter_ms);
        let end = start + cfg.nod_duration_ms;
        if end > total {
            break;
        }
        if clear(start, end) {
            events.push(BehaviorEvent::new(
                BehaviorKind::HeadNod,
                start,
                end,
                cfg.speaking_nod_amplitude,
            ));
        }
    }

    events.extend(shakes);
    BehaviorSchedule::from_events(events, total)
}

/// Plans backchannel nods while the user talks: one at the start, then one
/// per jittered period for as long as whole nods fit in `duration_ms`.
pub fn plan_listening(duration_ms: f64, seed: u64, cfg: &BehaviorConfig) -> BehaviorSchedule {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut events = Vec::new();
    let mut start = 0.0;
    while start + cfg.nod_duration_ms <= duration_ms {
        events.push(BehaviorEvent::new(
            BehaviorKind::HeadNod,
            start,
            start + cfg.nod_duration_ms,
            cfg.listening_nod_amplitude,
        ));
        start += jittered(&mut rng, cfg.listening_nod_period_ms, cfg.listening_nod_jitter_ms);
    }
    BehaviorSchedule::from_events(events, duration_ms.max(0.0))
}

fn jittered(rng: &mut ChaCha8Rng, period: f64, jitter: f64) -> f64 {
    if jitter > 0.0 {
        period + rng.gen_range(-jitter..=jitter)
    } else {
        period
    }
}

/// Face center and width in normalized image coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceObservation {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraParams {
    pub h_fov_rad: f64,
    pub v_fov_rad: f64,
}

impl Default for CameraParams {
    fn default() -> Self {
        Self {
            h_fov_rad: 60f64.to_radians(),
            v_fov_rad: 45f64.to_radians(),
        }
    }
}

/// Converts a face position to the head rotation that looks at it, using a
/// pinhole camera model. Positive yaw turns toward the right half of the
/// image, positive pitch toward the top.
pub fn face_to_gaze(obs: &FaceObservation, cam: &CameraParams) -> Gaze {
    Gaze {
        yaw_rad: ((2.0 * obs.cx - 1.0) * (cam.h_fov_rad / 2.0).tan()).atan(),
        pitch_rad: ((1.0 - 2.0 * obs.cy) * (cam.v_fov_rad / 2.0).tan()).atan(),
    }
}

/// Exponentially smoothed gaze direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GazeState {
    pub yaw_rad: f64,
    pub pitch_rad: f64,
    /// Fraction of the previous direction kept on each update.
    pub alpha: f64,
}

impl Default for GazeState {
    fn default() -> Self {
        Self::new(0.8)
    }
}

impl GazeState {
    pub fn new(alpha: f64) -> Self {
        assert!((0.0..1.0).contains(&alpha), "alpha must be in [0, 1)");
        Self {
            yaw_rad: 0.0,
            pitch_rad: 0.0,
            alpha,
        }
    }

    pub fn current(&self) -> Gaze {
        Gaze {
            yaw_rad: self.yaw_rad,
            pitch_rad: self.pitch_rad,
        }
    }

    /// Moves `1 - alpha` of the way toward `target` on each axis.
    pub fn smooth(&mut self, target: Gaze) -> Gaze {
        let k = 1.0 - self.alpha;
        self.yaw_rad += k * (target.yaw_rad - self.yaw_rad);
        self.pitch_rad += k * (target.pitch_rad - self.pitch_rad);
        self.current()
    }
}
