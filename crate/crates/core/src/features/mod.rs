//! Feature vectors around the gaze point.
//!
//! Features come either from stored frames, through a [`FeatureExtractor`]
//! applied to a square patch centered on the filtered gaze, or from a GZFT
//! file of precomputed embeddings.

pub mod gzft;
pub mod image;

use rayon::prelude::*;

pub use self::gzft::ingest_embeddings;
pub use self::image::GrayImage;
use crate::error::{Error, Result};
use crate::signal::normalize_features;
use crate::types::{FeatureFrame, FeatureSeries, GazeSeries};

pub const DEFAULT_BINS: usize = 64;

/// Square crop geometry for frames of a given size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PatchSpec {
    patch_b: usize,
    image_w: usize,
    image_h: usize,
}

impl PatchSpec {
    pub fn new(patch_b: usize, image_w: usize, image_h: usize) -> Result<Self> {
        if patch_b == 0 || patch_b > 2 * image_w.min(image_h) {
            return Err(Error::Config(format!(
                "patch size {patch_b} invalid for {image_w}x{image_h} frames"
            )));
        }
        Ok(PatchSpec {
            patch_b,
            image_w,
            image_h,
        })
    }

    pub fn patch_b(&self) -> usize {
        self.patch_b
    }

    pub fn image_size(&self) -> (usize, usize) {
        (self.image_w, self.image_h)
    }
}

/// `b x b` window around the rounded center; pixels outside the image are 0.
pub fn crop_patch(image: &GrayImage, center: (f64, f64), spec: &PatchSpec) -> Result<GrayImage> {
    if (image.width(), image.height()) != spec.image_size() {
        return Err(Error::Validation(format!(
            "frame is {}x{}, patch spec expects {}x{}",
            image.width(),
            image.height(),
            spec.image_w,
            spec.image_h
        )));
    }
    if !(center.0.is_finite() && center.1.is_finite()) {
        return Err(Error::Validation(format!("non-finite patch center {center:?}")));
    }
    let b = spec.patch_b;
    let x0 = center.0.round() as i64 - (b / 2) as i64;
    let y0 = center.1.round() as i64 - (b / 2) as i64;
    let mut data = Vec::with_capacity(b * b);
    for dy in 0..b as i64 {
        for dx in 0..b as i64 {
            data.push(image.get_signed(x0 + dx, y0 + dy).unwrap_or(0));
        }
    }
    GrayImage::new(b, b, data)
}

/// L2-normalized intensity histogram with `bins` equal-width bins over `[0, 255]`.
pub fn histogram_extractor(patch: &GrayImage, bins: usize) -> Result<Vec<f64>> {
    if bins < 2 {
        return Err(Error::Config(format!("histogram needs >= 2 bins, got {bins}")));
    }
    let mut hist = vec![0.0; bins];
    for &p in patch.pixels() {
        hist[p as usize * bins / 256] += 1.0;
    }
    let norm = hist.iter().map(|h| h * h).sum::<f64>().sqrt();
    Ok(hist.into_iter().map(|h| h / norm).collect())
}

/// Maps a frame and a gaze point in it to a fixed-length feature vector.
///
/// Implementations must be deterministic.
pub trait FeatureExtractor {
    fn dim(&self) -> usize;
    fn extract(&self, image: &GrayImage, center: (f64, f64)) -> Result<Vec<f64>>;
}

/// Built-in extractor: intensity histogram of the gaze-centered patch.
#[derive(Debug, Clone)]
pub struct PatchHistogram {
    pub patch: PatchSpec,
    pub bins: usize,
}

impl PatchHistogram {
    pub fn new(patch: PatchSpec, bins: usize) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Config(format!("histogram needs >= 2 bins, got {bins}")));
        }
        Ok(PatchHistogram { patch, bins })
    }
}

impl FeatureExtractor for PatchHistogram {
    fn dim(&self) -> usize {
        self.bins
    }

    fn extract(&self, image: &GrayImage, center: (f64, f64)) -> Result<Vec<f64>> {
        histogram_extractor(&crop_patch(image, center, &self.patch)?, self.bins)
    }
}

/// Extract left/right features for every step at the filtered gaze.
pub fn extract_series<E>(
    images_left: &[GrayImage],
    images_right: &[GrayImage],
    filtered: &GazeSeries,
    extractor: &E,
) -> Result<FeatureSeries>
where
    E: FeatureExtractor + Sync,
{
    for (what, n) in [("left frames", images_left.len()), ("right frames", images_right.len())] {
        if n != filtered.len() {
            return Err(Error::LengthMismatch {
                what,
                expected: filtered.len(),
                found: n,
            });
        }
    }
    let frames = filtered
        .samples()
        .par_iter()
        .zip(images_left.par_iter().zip(images_right.par_iter()))
        .map(|(g, (l, r))| FeatureFrame::new(extractor.extract(l, g.left())?, extractor.extract(r, g.right())?))
        .collect::<Result<Vec<_>>>()?;
    normalize_features(&FeatureSeries::new_uniform(frames)?)
}
