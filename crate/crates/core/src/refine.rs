//! Dataset-level refinement toward a consistent number of change points.
//!
//! The most frequent raw change-point count across a task's demonstrations is
//! taken as the target `s`. Each demonstration then restarts from the default
//! thresholds: both thresholds shrink geometrically while it has fewer than `s`
//! points, then grow while it has more. A demonstration that still misses `s`
//! after the iteration budget is marked excluded.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::detect::detect;
use crate::error::{Error, Result};
use crate::types::{ChangePointSet, ChangeScores, DemoStatus, DetectionConfig, TieBreak};

/// Scores of one demonstration, tagged with its id.
#[derive(Debug, Clone)]
pub struct ScoredDemo {
    pub id: String,
    pub scores: ChangeScores,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DemoOutcome {
    pub id: String,
    pub theta_pos: f64,
    pub theta_feat: f64,
    /// Threshold updates performed, over both loops.
    pub iterations: usize,
    pub status: DemoStatus,
    pub change_points: ChangePointSet,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    /// Target change-point count (the modal raw count).
    pub s: usize,
    pub per_demo: Vec<DemoOutcome>,
    /// Raw change-point count -> number of demonstrations, before refinement.
    pub counts_histogram: BTreeMap<usize, usize>,
    pub refined: bool,
}

impl RefinementReport {
    pub fn excluded(&self) -> usize {
        self.per_demo
            .iter()
            .filter(|d| d.status == DemoStatus::Excluded)
            .count()
    }
}

/// Count -> frequency table.
pub fn count_histogram(counts: &[usize]) -> BTreeMap<usize, usize> {
    let mut hist = BTreeMap::new();
    for &c in counts {
        *hist.entry(c).or_insert(0) += 1;
    }
    hist
}

/// Most frequent change-point count.
pub fn modal_count(raw: &[ChangePointSet], tie_break: TieBreak) -> Result<usize> {
    let counts: Vec<usize> = raw.iter().map(ChangePointSet::len).collect();
    modal_of_counts(&counts, tie_break)
}

pub fn modal_of_counts(counts: &[usize], tie_break: TieBreak) -> Result<usize> {
    let hist = count_histogram(counts);
    let best = hist.values().copied().max().ok_or(Error::EmptyDataset)?;
    let mut tied = hist.iter().filter(|(_, &f)| f == best).map(|(&c, _)| c);
    // BTreeMap iterates in ascending count order
    let pick = match tie_break {
        TieBreak::Smaller => tied.next(),
        TieBreak::Larger => tied.next_back(),
    };
    Ok(pick.expect("histogram is non-empty"))
}

/// Adjust the thresholds of one demonstration until it has exactly `s` points.
pub fn refine_demo(scores: &ChangeScores, s: usize, config: &DetectionConfig) -> Result<DemoOutcome> {
    config.validate()?;
    let mode = config.mode;
    let (mut theta_pos, mut theta_feat) = (config.theta_pos, config.theta_feat);
    let mut points = detect(scores, theta_pos, theta_feat, mode);

    let mut down = 0;
    while points.len() < s && down < config.max_iters {
        theta_pos *= config.scale_down;
        theta_feat *= config.scale_down;
        points = detect(scores, theta_pos, theta_feat, mode);
        down += 1;
    }
    let mut up = 0;
    while points.len() > s && up < config.max_iters {
        theta_pos *= config.scale_up;
        theta_feat *= config.scale_up;
        points = detect(scores, theta_pos, theta_feat, mode);
        up += 1;
    }
    let status = if points.len() == s {
        DemoStatus::Ok
    } else {
        DemoStatus::Excluded
    };
    Ok(DemoOutcome {
        id: String::new(),
        theta_pos,
        theta_feat,
        iterations: down + up,
        status,
        change_points: points.into_refined(),
    })
}

/// Detect with the default thresholds, fix `s`, and (if `config.refine`)
/// refine every demonstration toward it. Output order follows input order.
pub fn refine_dataset(demos: &[ScoredDemo], config: &DetectionConfig) -> Result<RefinementReport> {
    config.validate()?;
    if demos.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let raw: Vec<ChangePointSet> = demos
        .par_iter()
        .map(|d| detect(&d.scores, config.theta_pos, config.theta_feat, config.mode))
        .collect();
    let counts: Vec<usize> = raw.iter().map(ChangePointSet::len).collect();
    let s = modal_of_counts(&counts, config.tie_break)?;

    let per_demo = if config.refine {
        demos
            .par_iter()
            .map(|d| {
                let mut outcome = refine_demo(&d.scores, s, config)?;
                outcome.id = d.id.clone();
                Ok(outcome)
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        demos
            .iter()
            .zip(raw)
            .map(|(d, points)| DemoOutcome {
                id: d.id.clone(),
                theta_pos: config.theta_pos,
                theta_feat: config.theta_feat,
                iterations: 0,
                status: DemoStatus::Ok,
                change_points: points,
            })
            .collect()
    };

    Ok(RefinementReport {
        s,
        per_demo,
        counts_histogram: count_histogram(&counts),
        refined: config.refine,
    })
}
