//! Domain types shared by the signal, detection and refinement stages.
//!
//! Every type validates its invariants at construction and is immutable
//! afterwards, so values can be shared freely across threads.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binocular gaze point in image-pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GazeSample([f64; 4]);

impl GazeSample {
    pub fn new(left_x: f64, left_y: f64, right_x: f64, right_y: f64) -> Result<Self> {
        Self::from_array([left_x, left_y, right_x, right_y])
    }

    /// Build from `[left_x, left_y, right_x, right_y]`.
    pub fn from_array(v: [f64; 4]) -> Result<Self> {
        if let Some(bad) = v.iter().find(|c| !c.is_finite()) {
            return Err(Error::Validation(format!("gaze component {bad} is not finite")));
        }
        Ok(GazeSample(v))
    }

    pub fn left_x(&self) -> f64 {
        self.0[0]
    }

    pub fn left_y(&self) -> f64 {
        self.0[1]
    }

    pub fn right_x(&self) -> f64 {
        self.0[2]
    }

    pub fn right_y(&self) -> f64 {
        self.0[3]
    }

    pub fn left(&self) -> (f64, f64) {
        (self.0[0], self.0[1])
    }

    pub fn right(&self) -> (f64, f64) {
        (self.0[2], self.0[3])
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }
}

/// Dense gaze time series; index `i` is time step `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeSeries {
    samples: Vec<GazeSample>,
    rate_hz: f64,
}

pub const DEFAULT_RATE_HZ: f64 = 10.0;

impl GazeSeries {
    pub fn new(samples: Vec<GazeSample>, rate_hz: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::Validation(format!(
                "gaze series needs at least 2 samples, got {}",
                samples.len()
            )));
        }
        if !(rate_hz.is_finite() && rate_hz > 0.0) {
            return Err(Error::Validation(format!(
                "sampling rate must be positive, got {rate_hz}"
            )));
        }
        Ok(GazeSeries { samples, rate_hz })
    }

    /// Build from raw `[left_x, left_y, right_x, right_y]` rows at the default rate.
    pub fn from_rows(rows: &[[f64; 4]]) -> Result<Self> {
        let samples = rows
            .iter()
            .map(|r| GazeSample::from_array(*r))
            .collect::<Result<Vec<_>>>()?;
        Self::new(samples, DEFAULT_RATE_HZ)
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    /// Number of samples, `T + 1`.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Values of one coordinate (0..4) over time.
    pub fn component(&self, c: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s.0[c]).collect()
    }
}

/// Left/right feature vectors observed around the gaze at one time step.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFrame {
    left: Vec<f64>,
    right: Vec<f64>,
}

impl FeatureFrame {
    pub fn new(left: Vec<f64>, right: Vec<f64>) -> Result<Self> {
        if left.is_empty() {
            return Err(Error::Validation("feature dimension must be >= 1".into()));
        }
        if left.len() != right.len() {
            return Err(Error::Validation(format!(
                "left/right feature dimensions differ: {} vs {}",
                left.len(),
                right.len()
            )));
        }
        if left.iter().chain(&right).any(|v| !v.is_finite()) {
            return Err(Error::Validation("feature vector has non-finite entries".into()));
        }
        Ok(FeatureFrame { left, right })
    }

    pub fn left(&self) -> &[f64] {
        &self.left
    }

    pub fn right(&self) -> &[f64] {
        &self.right
    }

    pub fn dim(&self) -> usize {
        self.left.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSeries {
    frames: Vec<FeatureFrame>,
    dim: usize,
}

impl FeatureSeries {
    /// Frames may disagree in dimension here; [`crate::signal::score_feat`]
    /// reports the offending step. Use [`FeatureSeries::new_uniform`] to reject
    /// mixed dimensions up front.
    pub fn new(frames: Vec<FeatureFrame>) -> Result<Self> {
        let dim = frames
            .first()
            .map(FeatureFrame::dim)
            .ok_or_else(|| Error::Validation("feature series is empty".into()))?;
        Ok(FeatureSeries { frames, dim })
    }

    pub fn new_uniform(frames: Vec<FeatureFrame>) -> Result<Self> {
        let series = Self::new(frames)?;
        for (t, f) in series.frames.iter().enumerate() {
            if f.dim() != series.dim {
                return Err(Error::DimensionMismatch {
                    t,
                    expected: series.dim,
                    found: f.dim(),
                });
            }
        }
        Ok(series)
    }

    pub fn frames(&self) -> &[FeatureFrame] {
        &self.frames
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Check the pairing invariant against a gaze series.
    pub fn check_aligned(&self, gaze: &GazeSeries) -> Result<()> {
        if self.len() != gaze.len() {
            return Err(Error::LengthMismatch {
                what: "feature frames vs gaze samples",
                expected: gaze.len(),
                found: self.len(),
            });
        }
        Ok(())
    }
}

/// Per-step position and feature change scores, both of length `T + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeScores {
    s_pos: Vec<f64>,
    s_feat: Vec<f64>,
}

impl ChangeScores {
    pub fn new(s_pos: Vec<f64>, s_feat: Vec<f64>) -> Result<Self> {
        if s_pos.len() < 2 {
            return Err(Error::Validation("score series needs at least 2 steps".into()));
        }
        if s_pos.len() != s_feat.len() {
            return Err(Error::LengthMismatch {
                what: "s_feat vs s_pos",
                expected: s_pos.len(),
                found: s_feat.len(),
            });
        }
        if s_pos.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Validation("s_pos must be finite and non-negative".into()));
        }
        if s_feat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("s_feat must be finite".into()));
        }
        Ok(ChangeScores { s_pos, s_feat })
    }

    /// Position scores only; the feature stream is all zeros.
    pub fn from_pos(s_pos: Vec<f64>) -> Result<Self> {
        let n = s_pos.len();
        Self::new(s_pos, vec![0.0; n])
    }

    pub fn s_pos(&self) -> &[f64] {
        &self.s_pos
    }

    pub fn s_feat(&self) -> &[f64] {
        &self.s_feat
    }

    pub fn len(&self) -> usize {
        self.s_pos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s_pos.is_empty()
    }
}

/// Ordered change points, each a time step in `[1, T]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ChangePointSet {
    points: Vec<usize>,
    refined: bool,
}

impl ChangePointSet {
    /// `len` is the number of samples `T + 1` of the demonstration.
    pub fn new(points: Vec<usize>, refined: bool, len: usize) -> Result<Self> {
        if let Some(&p) = points.iter().find(|&&p| p == 0 || p >= len) {
            return Err(Error::Validation(format!(
                "change point {p} outside [1, {}]",
                len.saturating_sub(1)
            )));
        }
        if points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Validation("change points must be strictly increasing".into()));
        }
        Ok(ChangePointSet { points, refined })
    }

    pub(crate) fn from_sorted(points: Vec<usize>, refined: bool) -> Self {
        debug_assert!(points.windows(2).all(|w| w[0] < w[1]));
        ChangePointSet { points, refined }
    }

    pub fn empty() -> Self {
        ChangePointSet {
            points: Vec::new(),
            refined: false,
        }
    }

    pub fn points(&self) -> &[usize] {
        &self.points
    }

    pub fn is_refined(&self) -> bool {
        self.refined
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_refined(self) -> Self {
        ChangePointSet { refined: true, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DemoStatus {
    Ok,
    Excluded,
}

impl std::fmt::Display for DemoStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DemoStatus::Ok => "ok",
            DemoStatus::Excluded => "excluded",
        })
    }
}

/// Sub-task decomposition of one demonstration.
#[derive(Debug, Clone, PartialEq)]
pub struct Segmentation {
    boundaries: ChangePointSet,
    segments: Vec<Range<usize>>,
    status: DemoStatus,
}

impl Segmentation {
    pub fn new(boundaries: ChangePointSet, len: usize, status: DemoStatus) -> Result<Self> {
        let segments = segments_for(boundaries.points(), len)?;
        Ok(Segmentation {
            boundaries,
            segments,
            status,
        })
    }

    pub fn boundaries(&self) -> &ChangePointSet {
        &self.boundaries
    }

    /// Half-open step ranges partitioning `[0, T + 1)`.
    pub fn segments(&self) -> &[Range<usize>] {
        &self.segments
    }

    pub fn status(&self) -> DemoStatus {
        self.status
    }

    /// Sub-task index `k(t)` for every step.
    pub fn labels(&self) -> Vec<usize> {
        self.segments
            .iter()
            .enumerate()
            .flat_map(|(k, r)| r.clone().map(move |_| k))
            .collect()
    }
}

/// Split `[0, len)` at the given boundaries.
pub fn segments_for(points: &[usize], len: usize) -> Result<Vec<Range<usize>>> {
    ChangePointSet::new(points.to_vec(), false, len)?;
    let mut out = Vec::with_capacity(points.len() + 1);
    let mut start = 0;
    for &p in points {
        out.push(start..p);
        start = p;
    }
    out.push(start..len);
    Ok(out)
}

/// Which score streams gate detection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DetectionMode {
    #[default]
    Both,
    PosOnly,
    FeatOnly,
}

impl DetectionMode {
    pub fn uses_features(self) -> bool {
        !matches!(self, DetectionMode::PosOnly)
    }

    pub fn uses_position(self) -> bool {
        !matches!(self, DetectionMode::FeatOnly)
    }
}

impl std::fmt::Display for DetectionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DetectionMode::Both => "both",
            DetectionMode::PosOnly => "pos-only",
            DetectionMode::FeatOnly => "feat-only",
        })
    }
}

/// How to pick the modal change-point count when several counts tie.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    #[default]
    Smaller,
    Larger,
}

pub const DEFAULT_WINDOW: usize = 20;
pub const DEFAULT_PATCH: usize = 256;
pub const DEFAULT_THETA_POS: f64 = 50.0;
pub const DEFAULT_THETA_FEAT: f64 = 0.03;
pub const DEFAULT_SCALE_DOWN: f64 = 0.99;
pub const DEFAULT_SCALE_UP: f64 = 1.01;
pub const DEFAULT_MAX_ITERS: usize = 500;

/// Detection and refinement hyperparameters.
///
/// Deserializes from a partial mapping: missing keys take their defaults and
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectionConfig {
    /// Median filter width; the window spans `w / 2` steps on each side.
    pub window_w: usize,
    /// Side of the square crop around the gaze, in pixels.
    pub patch_b: usize,
    pub theta_pos: f64,
    pub theta_feat: f64,
    pub mode: DetectionMode,
    pub refine: bool,
    pub scale_down: f64,
    pub scale_up: f64,
    /// Iteration budget for each of the two threshold-adjustment loops.
    pub max_iters: usize,
    pub tie_break: TieBreak,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        DetectionConfig {
            window_w: DEFAULT_WINDOW,
            patch_b: DEFAULT_PATCH,
            theta_pos: DEFAULT_THETA_POS,
            theta_feat: DEFAULT_THETA_FEAT,
            mode: DetectionMode::Both,
            refine: true,
            scale_down: DEFAULT_SCALE_DOWN,
            scale_up: DEFAULT_SCALE_UP,
            max_iters: DEFAULT_MAX_ITERS,
            tie_break: TieBreak::Smaller,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window_w < 2 {
            return Err(Error::Config(format!("window_w must be >= 2, got {}", self.window_w)));
        }
        if self.patch_b == 0 {
            return Err(Error::Config("patch_b must be positive".into()));
        }
        if !(self.theta_pos.is_finite() && self.theta_pos > 0.0) {
            return Err(Error::Config(format!(
                "theta_pos must be positive, got {}",
                self.theta_pos
            )));
        }
        if !(self.theta_feat.is_finite() && self.theta_feat > 0.0) {
            return Err(Error::Config(format!(
                "theta_feat must be positive, got {}",
                self.theta_feat
            )));
        }
        if !(self.scale_down > 0.0 && self.scale_down < 1.0) {
            return Err(Error::Config(format!(
                "scale_down must be in (0, 1), got {}",
                self.scale_down
            )));
        }
        if !(self.scale_up.is_finite() && self.scale_up > 1.0) {
            return Err(Error::Config(format!("scale_up must be > 1, got {}", self.scale_up)));
        }
        if self.max_iters == 0 {
            return Err(Error::Config("max_iters must be positive".into()));
        }
        Ok(())
    }
}
