//! Median filtering of gaze and the two per-step change scores.

use crate::error::{Error, Eye, Result};
use crate::types::{ChangeScores, FeatureFrame, FeatureSeries, GazeSample, GazeSeries};

/// Lower clamp applied to the `<f_prev, f_cur> + 1` log arguments.
pub const LOG_ARG_FLOOR: f64 = 1e-9;

/// Component-wise sliding median.
///
/// Sample `t` of the output is the median of the raw samples in
/// `[t - w/2, t + w/2]` intersected with the series bounds. Even-count
/// windows (only at the edges, or with odd `w`) average the two middle values.
pub fn median_filter(gaze: &GazeSeries, window_w: usize) -> Result<GazeSeries> {
    if window_w < 2 {
        return Err(Error::Config(format!("median window must be >= 2, got {window_w}")));
    }
    let half = window_w / 2;
    let n = gaze.len();
    let columns: Vec<Vec<f64>> = (0..4).map(|c| gaze.component(c)).collect();
    let mut buf = Vec::with_capacity(2 * half + 1);

    let mut out = Vec::with_capacity(n);
    for t in 0..n {
        let lo = t.saturating_sub(half);
        let hi = (t + half).min(n - 1);
        let mut v = [0.0; 4];
        for (c, col) in columns.iter().enumerate() {
            buf.clear();
            buf.extend_from_slice(&col[lo..=hi]);
            v[c] = median_in_place(&mut buf);
        }
        out.push(GazeSample::from_array(v)?);
    }
    GazeSeries::new(out, gaze.rate_hz())
}

fn median_in_place(values: &mut [f64]) -> f64 {
    let n = values.len();
    let mid = n / 2;
    let (lower, m, _) = values.select_nth_unstable_by(mid, f64::total_cmp);
    let upper = *m;
    if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (below + upper) / 2.0
    }
}

/// Euclidean norm of the 4-D step between consecutive filtered samples.
pub fn score_pos(filtered: &GazeSeries) -> Vec<f64> {
    let s = filtered.samples();
    let mut out = Vec::with_capacity(s.len());
    out.push(0.0);
    out.extend(s.windows(2).map(|w| {
        let (a, b) = (w[0].as_array(), w[1].as_array());
        a.iter().zip(&b).map(|(x, y)| (y - x) * (y - x)).sum::<f64>().sqrt()
    }));
    out
}

fn unit(v: &[f64], t: usize, eye: Eye) -> Result<Vec<f64>> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::ZeroNorm { t, eye });
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// L2-normalize every left and right vector.
pub fn normalize_features(features: &FeatureSeries) -> Result<FeatureSeries> {
    let frames = features
        .frames()
        .iter()
        .enumerate()
        .map(|(t, f)| FeatureFrame::new(unit(f.left(), t, Eye::Left)?, unit(f.right(), t, Eye::Right)?))
        .collect::<Result<Vec<_>>>()?;
    FeatureSeries::new(frames)
}

/// Inner product of two unit vectors, computed as `1 - |a - b|^2 / 2`.
///
/// Identical inputs give exactly 1 and antipodal ones exactly -1, which the
/// direct dot product does not guarantee after rounding.
fn unit_inner(a: &[f64], b: &[f64]) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (1.0 - d2 / 2.0).clamp(-1.0, 1.0)
}

/// Feature change score from unit-normalized left/right features.
pub fn score_feat(features: &FeatureSeries) -> Result<Vec<f64>> {
    let frames = features.frames();
    let mut out = Vec::with_capacity(frames.len());
    out.push(0.0);
    for (t, w) in frames.windows(2).enumerate().map(|(i, w)| (i + 1, w)) {
        let (prev, cur) = (&w[0], &w[1]);
        if prev.dim() != cur.dim() {
            return Err(Error::DimensionMismatch {
                t,
                expected: prev.dim(),
                found: cur.dim(),
            });
        }
        let l = (unit_inner(prev.left(), cur.left()) + 1.0).max(LOG_ARG_FLOOR);
        let r = (unit_inner(prev.right(), cur.right()) + 1.0).max(LOG_ARG_FLOOR);
        out.push(-(l.ln() + r.ln()) / 2.0 + std::f64::consts::LN_2);
    }
    Ok(out)
}

/// Scores for a filtered gaze series and, optionally, its aligned features.
///
/// Features are normalized before scoring. Without features `s_feat` is zero.
pub fn compute_scores(filtered: &GazeSeries, features: Option<&FeatureSeries>) -> Result<ChangeScores> {
    let s_pos = score_pos(filtered);
    let s_feat = match features {
        Some(f) => {
            f.check_aligned(filtered)?;
            score_feat(&normalize_features(f)?)?
        }
        None => vec![0.0; s_pos.len()],
    };
    ChangeScores::new(s_pos, s_feat)
}
