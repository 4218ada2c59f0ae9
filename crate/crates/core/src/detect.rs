//! Threshold detection of change points from score series.

use crate::types::{ChangePointSet, ChangeScores, DetectionMode};

fn exceeds(scores: &ChangeScores, t: usize, theta_pos: f64, theta_feat: f64, mode: DetectionMode) -> bool {
    let pos = scores.s_pos()[t] > theta_pos;
    let feat = scores.s_feat()[t] > theta_feat;
    match mode {
        DetectionMode::Both => pos && feat,
        DetectionMode::PosOnly => pos,
        DetectionMode::FeatOnly => feat,
    }
}

/// All steps `t >= 1` whose active scores strictly exceed their thresholds.
pub fn strict_exceedance_set(
    scores: &ChangeScores,
    theta_pos: f64,
    theta_feat: f64,
    mode: DetectionMode,
) -> Vec<usize> {
    (1..scores.len())
        .filter(|&t| exceeds(scores, t, theta_pos, theta_feat, mode))
        .collect()
}

/// Change points: the first step of every maximal run of exceeding steps.
pub fn detect(scores: &ChangeScores, theta_pos: f64, theta_feat: f64, mode: DetectionMode) -> ChangePointSet {
    let mut points = Vec::new();
    let mut in_run = false;
    for t in 1..scores.len() {
        let hit = exceeds(scores, t, theta_pos, theta_feat, mode);
        if hit && !in_run {
            points.push(t);
        }
        in_run = hit;
    }
    ChangePointSet::from_sorted(points, false)
}

/// Number of change points [`detect`] would return, without allocating.
pub fn count(scores: &ChangeScores, theta_pos: f64, theta_feat: f64, mode: DetectionMode) -> usize {
    let mut n = 0;
    let mut in_run = false;
    for t in 1..scores.len() {
        let hit = exceeds(scores, t, theta_pos, theta_feat, mode);
        if hit && !in_run {
            n += 1;
        }
        in_run = hit;
    }
    n
}
