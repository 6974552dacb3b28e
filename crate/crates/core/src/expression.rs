//! Facial expression from valence and arousal.
//!
//! The whole face is eight blend-shape weights. A small table of presets pins
//! known expressions to points in the valence-arousal plane, and any other
//! point is a Shepard (inverse-distance, power 2) blend of all presets.
//! During speech the three mouth shapes are driven by lip-sync instead, with a
//! light tint from the expression underneath.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::lipsync::VisemeWeights;

/// Anchors closer than this are treated as coincident with the query.
pub const ANCHOR_EPSILON: f64 = 1e-9;

/// How much of the expression's mouth shapes leaks through while speaking.
pub const MOUTH_TINT: f64 = 0.25;

pub const SHAPE_NAMES: [&str; 8] = [
    "browsUp",
    "browsDown",
    "eyeLidsClosed",
    "smile",
    "frown",
    "kiss",
    "lipsPressed",
    "mouthOpen",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct BlendShapeVector {
    pub brows_up: f64,
    pub brows_down: f64,
    pub eye_lids_closed: f64,
    pub smile: f64,
    pub frown: f64,
    pub kiss: f64,
    pub lips_pressed: f64,
    pub mouth_open: f64,
}

impl BlendShapeVector {
    pub fn to_array(&self) -> [f64; 8] {
        [
            self.brows_up,
            self.brows_down,
            self.eye_lids_closed,
            self.smile,
            self.frown,
            self.kiss,
            self.lips_pressed,
            self.mouth_open,
        ]
    }

    pub fn from_array(w: [f64; 8]) -> Self {
        Self {
            brows_up: w[0],
            brows_down: w[1],
            eye_lids_closed: w[2],
            smile: w[3],
            frown: w[4],
            kiss: w[5],
            lips_pressed: w[6],
            mouth_open: w[7],
        }
    }

    pub fn clamped(&self) -> Self {
        Self::from_array(self.to_array().map(clamp01))
    }

    pub fn in_range(&self) -> bool {
        self.to_array().iter().all(|w| (0.0..=1.0).contains(w))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ValenceArousal {
    pub v: f64,
    pub a: f64,
}

impl ValenceArousal {
    pub fn new(v: f64, a: f64) -> Self {
        Self { v, a }
    }

    fn distance_sq(&self, other: &Self) -> f64 {
        (self.v - other.v).powi(2) + (self.a - other.a).powi(2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpressionPreset {
    pub name: String,
    pub anchor: ValenceArousal,
    pub weights: BlendShapeVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PresetTable {
    pub presets: Vec<ExpressionPreset>,
}

pub const DEFAULT_PRESETS: &str = include_str!("../data/presets.json");

impl Default for PresetTable {
    fn default() -> Self {
        serde_json::from_str(DEFAULT_PRESETS).expect("bundled preset table is valid")
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExpressionError {
    #[error("preset table is empty")]
    EmptyTable,
    #[error("failed to read presets {path}: {message}")]
    Load { path: String, message: String },
    #[error("invalid preset table: {}", .0.join("; "))]
    Invalid(Vec<String>),
}

impl PresetTable {
    /// Loads and validates a preset table from a JSON file.
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ExpressionError> {
        let path = path.as_ref();
        let load_err = |message: String| ExpressionError::Load {
            path: path.display().to_string(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| load_err(e.to_string()))?;
        let table: Self = serde_json::from_str(&text).map_err(|e| load_err(e.to_string()))?;
        let violations = validate_presets(&table);
        if violations.is_empty() {
            Ok(table)
        } else {
            Err(ExpressionError::Invalid(violations))
        }
    }
}

/// Lists every broken table invariant; an empty list means the table is valid.
pub fn validate_presets(table: &PresetTable) -> Vec<String> {
    let mut violations = Vec::new();
    for (i, p) in table.presets.iter().enumerate() {
        if !(-1.0..=1.0).contains(&p.anchor.v) || !(-1.0..=1.0).contains(&p.anchor.a) {
            violations.push(format!("preset `{}` anchor outside [-1, 1]²", p.name));
        }
        if !p.weights.in_range() {
            violations.push(format!("preset `{}` has weights outside [0, 1]", p.name));
        }
        for q in &table.presets[..i] {
            if p.anchor.distance_sq(&q.anchor).sqrt() < ANCHOR_EPSILON {
                violations.push(format!("presets `{}` and `{}` share an anchor", q.name, p.name));
            }
        }
    }
    match table.presets.iter().find(|p| p.name == "neutral") {
        None => violations.push("no `neutral` preset".into()),
        Some(n) => {
            if n.anchor != ValenceArousal::default() {
                violations.push("`neutral` must sit at (0, 0)".into());
            }
            if n.weights != BlendShapeVector::default() {
                violations.push("`neutral` must have all-zero weights".into());
            }
        }
    }
    violations
}

/// Blends the presets for a point in valence-arousal space.
pub fn map_expression(va: ValenceArousal, table: &PresetTable) -> Result<BlendShapeVector, ExpressionError> {
    if table.presets.is_empty() {
        return Err(ExpressionError::EmptyTable);
    }
    let mut acc = [0.0; 8];
    let mut total = 0.0;
    for preset in &table.presets {
        let d2 = va.distance_sq(&preset.anchor);
        if d2.sqrt() < ANCHOR_EPSILON {
            return Ok(preset.weights.clamped());
        }
        let w = 1.0 / d2;
        total += w;
        for (a, p) in acc.iter_mut().zip(preset.weights.to_array()) {
            *a += w * p;
        }
    }
    Ok(BlendShapeVector::from_array(acc.map(|a| clamp01(a / total))))
}

/// Overlays lip-sync mouth shapes on an expression.
///
/// While speaking, each mouth shape becomes `viseme + MOUTH_TINT * expr`,
/// clamped to `[0, 1]`. The five upper-face shapes never change.
pub fn blend_with_visemes(expr: &BlendShapeVector, visemes: &VisemeWeights, speaking: bool) -> BlendShapeVector {
    if !speaking {
        return *expr;
    }
    BlendShapeVector {
        kiss: clamp01(visemes.kiss + MOUTH_TINT * expr.kiss),
        lips_pressed: clamp01(visemes.lips_pressed + MOUTH_TINT * expr.lips_pressed),
        mouth_open: clamp01(visemes.mouth_open + MOUTH_TINT * expr.mouth_open),
        ..*expr
    }
}

pub(crate) fn clamp01(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}
