//! Gaze-based task decomposition for teleoperated robot demonstrations.
//!
//! Abrupt changes in the operator's gaze (its filtered position and the
//! visual features around it) mark switches between sub-tasks. Thresholding
//! the two change scores yields candidate boundaries per demonstration, and a
//! dataset-level refinement pass rescales thresholds per demonstration so all
//! demonstrations of a task share the same number of sub-tasks.
//!
//! ```no_run
//! use gazeseg::{pipeline, DetectionConfig, DetectionMode};
//!
//! let config = DetectionConfig { mode: DetectionMode::PosOnly, ..Default::default() };
//! let seg = pipeline::segment_manifest("data/manifest.json".as_ref(), &config)?;
//! for demo in &seg.demos {
//!     println!("{} {:?}", demo.id, demo.change_points);
//! }
//! # Ok::<(), gazeseg::Error>(())
//! ```

pub mod detect;
pub mod error;
pub mod eval;
pub mod features;
pub mod io;
pub mod pipeline;
pub mod refine;
pub mod signal;
pub mod sweep;
pub mod synth;
pub mod types;

pub use crate::detect::{detect, strict_exceedance_set};
pub use crate::error::{Error, Result};
pub use crate::refine::{modal_count, refine_dataset, refine_demo, RefinementReport, ScoredDemo};
pub use crate::signal::{median_filter, normalize_features, score_feat, score_pos};
pub use crate::types::*;
