//! Hyperparameter sweep over median window and position threshold.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::eval::evaluate;
use crate::io::GroundTruth;
use crate::pipeline::{segment, Dataset};
use crate::types::DetectionConfig;

pub const GRID_WINDOWS: [usize; 6] = [5, 10, 15, 20, 25, 30];
pub const GRID_THETA_POS: [f64; 6] = [25.0, 50.0, 75.0, 100.0, 125.0, 150.0];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepGrid {
    pub windows: Vec<usize>,
    pub theta_pos: Vec<f64>,
    pub refine: Vec<bool>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            windows: GRID_WINDOWS.to_vec(),
            theta_pos: GRID_THETA_POS.to_vec(),
            refine: vec![false, true],
        }
    }
}

impl SweepGrid {
    pub fn cells(&self) -> Vec<(bool, usize, f64)> {
        let mut out = Vec::new();
        for &r in &self.refine {
            for &w in &self.windows {
                for &t in &self.theta_pos {
                    out.push((r, w, t));
                }
            }
        }
        out
    }
}

/// One grid cell. Failed cells carry `-1` counts.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub w: usize,
    pub theta_pos: f64,
    pub refine: bool,
    pub n_correct: i64,
    pub n_excluded: i64,
}

fn run_cell(
    dataset: &Dataset,
    truth: &[GroundTruth],
    config: &DetectionConfig,
    tolerance_steps: usize,
) -> Result<(usize, usize)> {
    let seg = segment(dataset, config)?;
    let m = evaluate(&seg, truth, tolerance_steps)?;
    Ok((m.majority, m.excluded))
}

/// Segment and evaluate the dataset at every grid cell. Rows come back in
/// grid order: refine setting, then window, then threshold.
pub fn sweep(
    dataset: &Dataset,
    truth: &[GroundTruth],
    base: &DetectionConfig,
    grid: &SweepGrid,
    tolerance_steps: usize,
) -> Vec<SweepRow> {
    grid.cells()
        .into_par_iter()
        .map(|(refine, w, theta_pos)| {
            let config = DetectionConfig {
                window_w: w,
                theta_pos,
                refine,
                ..base.clone()
            };
            let (n_correct, n_excluded) = match run_cell(dataset, truth, &config, tolerance_steps) {
                Ok((c, e)) => (c as i64, e as i64),
                Err(_) => (-1, -1),
            };
            SweepRow {
                w,
                theta_pos,
                refine,
                n_correct,
                n_excluded,
            }
        })
        .collect()
}

pub fn format_sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from("w,theta_pos,refine,n_correct,n_excluded\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.w, r.theta_pos, r.refine, r.n_correct, r.n_excluded
        )
        .unwrap();
    }
    out
}
