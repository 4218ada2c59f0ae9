//! End-to-end segmentation of a dataset:
//! filter -> (features) -> scores -> detect -> (refine).

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::image::read_frame_dir;
use crate::features::{extract_series, gzft, GrayImage, PatchHistogram, PatchSpec, DEFAULT_BINS};
use crate::io::{self, GroundTruth, Manifest, ManifestEntry, SegmentationFile};
use crate::refine::{refine_dataset, RefinementReport, ScoredDemo};
use crate::signal::{compute_scores, median_filter};
use crate::types::{ChangeScores, DetectionConfig, FeatureSeries, GazeSeries};

/// Where a demonstration's features come from.
#[derive(Debug, Clone)]
pub enum FeatureSource {
    Embedded(FeatureSeries),
    Frames {
        left: Vec<GrayImage>,
        right: Vec<GrayImage>,
    },
}

#[derive(Debug, Clone)]
pub struct DemoData {
    pub id: String,
    pub gaze: GazeSeries,
    pub features: Option<FeatureSource>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub task: String,
    pub demos: Vec<DemoData>,
}

/// Load every demo of a manifest. Feature files and frames are only read
/// when `with_features` is set; GZFT embeddings win over frames.
pub fn load_dataset(manifest: &Manifest, with_features: bool) -> Result<Dataset> {
    let demos = manifest
        .demos
        .par_iter()
        .map(|entry| {
            let id = entry.id.as_str();
            let gaze = io::read_gaze_csv(&entry.gaze).map_err(|e| e.in_demo(id, "load gaze"))?;
            let features = if !with_features {
                None
            } else if let Some(path) = &entry.features {
                let f = gzft::ingest_embeddings(path).map_err(|e| e.in_demo(id, "load features"))?;
                Some(FeatureSource::Embedded(f))
            } else if let (Some(l), Some(r)) = (&entry.frames_left, &entry.frames_right) {
                let left = read_frame_dir(l, "left").map_err(|e| e.in_demo(id, "load frames"))?;
                let right = read_frame_dir(r, "right").map_err(|e| e.in_demo(id, "load frames"))?;
                Some(FeatureSource::Frames { left, right })
            } else {
                None
            };
            Ok(DemoData {
                id: entry.id.clone(),
                gaze,
                features,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        task: manifest.task.clone(),
        demos,
    })
}

/// Ground truth of every demo, in manifest order.
pub fn load_ground_truth(manifest: &Manifest) -> Result<Vec<GroundTruth>> {
    manifest
        .demos
        .iter()
        .map(|d| {
            let path = d.ground_truth.as_ref().ok_or_else(|| {
                Error::Validation("no ground_truth path in manifest".into()).in_demo(&d.id, "load ground truth")
            })?;
            io::read_ground_truth(path).map_err(|e| e.in_demo(&d.id, "load ground truth"))
        })
        .collect()
}

fn features_for(demo: &DemoData, filtered: &GazeSeries, config: &DetectionConfig) -> Result<FeatureSeries> {
    match &demo.features {
        Some(FeatureSource::Embedded(f)) => Ok(f.clone()),
        Some(FeatureSource::Frames { left, right }) => {
            let first = left
                .first()
                .ok_or_else(|| Error::Validation("frame directory is empty".into()))?;
            let spec = PatchSpec::new(config.patch_b, first.width(), first.height())?;
            let extractor = PatchHistogram::new(spec, DEFAULT_BINS)?;
            extract_series(left, right, filtered, &extractor)
        }
        None => Err(Error::Config(format!(
            "mode {} needs features or frames in the manifest",
            config.mode
        ))),
    }
}

/// Change scores of one demonstration under `config`.
pub fn demo_scores(demo: &DemoData, config: &DetectionConfig) -> Result<ChangeScores> {
    let id = demo.id.as_str();
    let filtered = median_filter(&demo.gaze, config.window_w).map_err(|e| e.in_demo(id, "median filter"))?;
    if !config.mode.uses_features() {
        return compute_scores(&filtered, None).map_err(|e| e.in_demo(id, "scores"));
    }
    let features = features_for(demo, &filtered, config).map_err(|e| e.in_demo(id, "features"))?;
    compute_scores(&filtered, Some(&features)).map_err(|e| e.in_demo(id, "scores"))
}

pub fn score_dataset(dataset: &Dataset, config: &DetectionConfig) -> Result<Vec<ScoredDemo>> {
    dataset
        .demos
        .par_iter()
        .map(|d| {
            Ok(ScoredDemo {
                id: d.id.clone(),
                scores: demo_scores(d, config)?,
            })
        })
        .collect()
}

pub fn segment_report(dataset: &Dataset, config: &DetectionConfig) -> Result<RefinementReport> {
    config.validate()?;
    refine_dataset(&score_dataset(dataset, config)?, config)
}

/// Segment a loaded dataset into the result-file model.
pub fn segment(dataset: &Dataset, config: &DetectionConfig) -> Result<SegmentationFile> {
    let report = segment_report(dataset, config)?;
    Ok(SegmentationFile::from_report(&dataset.task, &report))
}

/// Load the manifest at `path` and segment it.
pub fn segment_manifest(path: &Path, config: &DetectionConfig) -> Result<SegmentationFile> {
    config.validate()?;
    let manifest = io::read_manifest(path)?;
    if config.mode.uses_features() {
        if let Some(d) = manifest.demos.iter().find(|d| !d.has_feature_source()) {
            return Err(
                Error::Config(format!("mode {} needs features or frames in the manifest", config.mode))
                    .in_demo(&d.id, "features"),
            );
        }
    }
    let dataset = load_dataset(&manifest, config.mode.uses_features())?;
    segment(&dataset, config)
}

/// Extract features from the frames of every demo, store them as
/// `{out_dir}/{id}.gzft`, and return the manifest with absolute paths that
/// point at them. Frames stay listed; embeddings take precedence on load.
pub fn extract_manifest(manifest: &Manifest, config: &DetectionConfig, out_dir: &Path) -> Result<Manifest> {
    config.validate()?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let demos = manifest
        .demos
        .par_iter()
        .map(|entry| {
            let id = entry.id.as_str();
            let (Some(l), Some(r)) = (&entry.frames_left, &entry.frames_right) else {
                return Err(Error::Config("no frames_left/frames_right in manifest".into()).in_demo(id, "extract"));
            };
            let demo = DemoData {
                id: entry.id.clone(),
                gaze: io::read_gaze_csv(&entry.gaze).map_err(|e| e.in_demo(id, "load gaze"))?,
                features: Some(FeatureSource::Frames {
                    left: read_frame_dir(l, "left").map_err(|e| e.in_demo(id, "load frames"))?,
                    right: read_frame_dir(r, "right").map_err(|e| e.in_demo(id, "load frames"))?,
                }),
            };
            let filtered = median_filter(&demo.gaze, config.window_w).map_err(|e| e.in_demo(id, "median filter"))?;
            let features = features_for(&demo, &filtered, config).map_err(|e| e.in_demo(id, "features"))?;
            let path = out_dir.join(format!("{id}.gzft"));
            gzft::write(&path, &features).map_err(|e| e.in_demo(id, "write features"))?;

            let abs = |p: &Path| std::path::absolute(p).map_err(|e| Error::io(p, e));
            Ok(ManifestEntry {
                id: entry.id.clone(),
                gaze: abs(&entry.gaze)?,
                features: Some(abs(&path)?),
                frames_left: Some(abs(l)?),
                frames_right: Some(abs(r)?),
                ground_truth: entry.ground_truth.as_deref().map(abs).transpose()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Manifest {
        task: manifest.task.clone(),
        demos,
    })
}

/// Ground truth from a manifest, a JSON array of ground-truth records, or a
/// single record.
pub fn read_truth(path: &Path) -> Result<Vec<GroundTruth>> {
    #[derive(serde::Deserialize)]
    #[serde(untagged)]
    enum TruthFile {
        One(GroundTruth),
        Many(Vec<GroundTruth>),
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    if value.get("demos").is_some() {
        return load_ground_truth(&io::read_manifest(path)?);
    }
    match serde_json::from_value(value).map_err(|e| Error::json(path, e))? {
        TruthFile::One(g) => Ok(vec![g]),
        TruthFile::Many(v) => Ok(v),
    }
}

/// Per-step gaze rows and optional `[t][eye][d]` features, as handed over by
/// array-based callers.
#[derive(Debug, Clone)]
pub struct ArrayDemo {
    pub id: String,
    pub gaze: Vec<[f64; 4]>,
    pub features: Option<Vec<[Vec<f64>; 2]>>,
}

impl ArrayDemo {
    fn into_demo(self) -> Result<DemoData> {
        let gaze = GazeSeries::from_rows(&self.gaze).map_err(|e| e.in_demo(&self.id, "gaze"))?;
        let features = match self.features {
            Some(rows) => {
                let frames = rows
                    .into_iter()
                    .map(|[l, r]| crate::types::FeatureFrame::new(l, r))
                    .collect::<Result<Vec<_>>>()
                    .and_then(FeatureSeries::new_uniform)
                    .map_err(|e| e.in_demo(&self.id, "features"))?;
                Some(FeatureSource::Embedded(frames))
            }
            None => None,
        };
        Ok(DemoData {
            id: self.id,
            gaze,
            features,
        })
    }
}

/// Change points of one in-memory demonstration under fixed thresholds.
pub fn detect_arrays(demo: ArrayDemo, config: &DetectionConfig) -> Result<Vec<usize>> {
    config.validate()?;
    let demo = demo.into_demo()?;
    let scores = demo_scores(&demo, config)?;
    Ok(
        crate::detect::detect(&scores, config.theta_pos, config.theta_feat, config.mode)
            .points()
            .to_vec(),
    )
}

/// Segment in-memory demonstrations; same result model as the CLI output.
pub fn segment_arrays(task: &str, demos: Vec<ArrayDemo>, config: &DetectionConfig) -> Result<SegmentationFile> {
    let demos = demos
        .into_iter()
        .map(ArrayDemo::into_demo)
        .collect::<Result<Vec<_>>>()?;
    segment(
        &Dataset {
            task: task.to_string(),
            demos,
        },
        config,
    )
}
