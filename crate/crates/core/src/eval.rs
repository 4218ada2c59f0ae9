//! Scoring segmentations against ground-truth boundaries.
//!
//! A demonstration is correct when it is not excluded, its change-point count
//! equals the ground-truth count, and the i-th detected point lies within
//! `tolerance_steps` of the i-th true boundary. Everything else is minority.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{GroundTruth, SegmentationFile};
use crate::types::DemoStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemoEval {
    pub id: String,
    pub correct: bool,
    pub status: DemoStatus,
    pub n_detected: usize,
    pub n_truth: usize,
    /// Largest matched boundary error; `None` when the counts differ.
    pub max_error: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub tolerance_steps: usize,
    pub n_demos: usize,
    pub majority: usize,
    pub minority: usize,
    pub excluded: usize,
    /// Mean and max over all matched boundaries of count-consistent demos.
    pub boundary_error_mean: Option<f64>,
    pub boundary_error_max: Option<usize>,
    pub demos: Vec<DemoEval>,
}

pub fn evaluate(seg: &SegmentationFile, truth: &[GroundTruth], tolerance_steps: usize) -> Result<EvalMetrics> {
    let by_id: HashMap<&str, &GroundTruth> = truth.iter().map(|g| (g.demo_id.as_str(), g)).collect();
    let seg_ids: BTreeSet<&str> = seg.demos.iter().map(|d| d.id.as_str()).collect();
    let truth_ids: BTreeSet<&str> = by_id.keys().copied().collect();
    if seg_ids != truth_ids || seg_ids.len() != seg.demos.len() || truth_ids.len() != truth.len() {
        let missing: Vec<_> = seg_ids.symmetric_difference(&truth_ids).collect();
        return Err(Error::Validation(format!(
            "segmentation and ground truth ids do not align (unmatched or duplicate: {missing:?})"
        )));
    }

    let mut errors = Vec::new();
    let demos: Vec<DemoEval> = seg
        .demos
        .iter()
        .map(|d| {
            let gt = &by_id[d.id.as_str()].boundaries;
            let max_error = (d.change_points.len() == gt.len()).then(|| {
                let pair: Vec<usize> = d.change_points.iter().zip(gt).map(|(a, b)| a.abs_diff(*b)).collect();
                errors.extend(&pair);
                pair.into_iter().max().unwrap_or(0)
            });
            let correct = d.status == DemoStatus::Ok && max_error.is_some_and(|e| e <= tolerance_steps);
            DemoEval {
                id: d.id.clone(),
                correct,
                status: d.status,
                n_detected: d.change_points.len(),
                n_truth: gt.len(),
                max_error,
            }
        })
        .collect();

    let majority = demos.iter().filter(|d| d.correct).count();
    Ok(EvalMetrics {
        tolerance_steps,
        n_demos: demos.len(),
        majority,
        minority: demos.len() - majority,
        excluded: seg.excluded(),
        boundary_error_mean: (!errors.is_empty()).then(|| errors.iter().sum::<usize>() as f64 / errors.len() as f64),
        boundary_error_max: errors.iter().copied().max(),
        demos,
    })
}
