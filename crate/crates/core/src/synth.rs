//! Synthetic demonstrations with known sub-task boundaries.
//!
//! The operator fixates a sequence of landmarks: gaze sits on landmark `i`
//! for its dwell time, then jumps to landmark `i + 1`. Each sample carries
//! isotropic Gaussian noise, and brief 1-3 step glances to distant points are
//! inserted at random. Ground truth is the first step spent on each new
//! landmark; glances never appear in it.
//!
//! Features are produced either directly (the histogram of the landmark's
//! intensity band plus small jitter) or by rendering frames in which every
//! landmark is a textured square in its own intensity band.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::image::{frame_file_name, write_pgm, GrayImage};
use crate::features::{gzft, DEFAULT_BINS};
use crate::io::{self, GroundTruth, Manifest, ManifestEntry};
use crate::signal::normalize_features;
use crate::types::{FeatureFrame, FeatureSeries, GazeSeries};

/// Horizontal offset of the right-eye gaze relative to the left eye, in pixels.
pub const DEFAULT_DISPARITY: f64 = 10.0;

/// Minimum distance of a glance target from the fixated landmark.
const GLANCE_MIN_DISTANCE: f64 = 150.0;

const BANDS: [(u8, u8); 6] = [(0, 31), (64, 95), (128, 159), (192, 223), (32, 63), (160, 191)];
const BACKGROUND_BAND: (u8, u8) = (96, 127);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Landmark {
    /// `[left_x, left_y, right_x, right_y]` at step 0.
    pub position: [f64; 4],
    pub dwell_steps: usize,
    #[serde(default)]
    pub drift_per_step: [f64; 4],
}

impl Landmark {
    /// Landmark seen at `(x, y)` by the left eye and shifted by the default
    /// disparity in the right eye.
    pub fn binocular(x: f64, y: f64, dwell_steps: usize) -> Self {
        Landmark {
            position: [x, y, x - DEFAULT_DISPARITY, y],
            dwell_steps,
            drift_per_step: [0.0; 4],
        }
    }

    /// Position at global step `t`.
    pub fn at(&self, t: usize) -> [f64; 4] {
        let mut p = self.position;
        for (c, d) in p.iter_mut().zip(self.drift_per_step) {
            *c += d * t as f64;
        }
        p
    }
}

fn default_image_size() -> (usize, usize) {
    (1280, 720)
}

fn default_feature_dim() -> usize {
    DEFAULT_BINS
}

fn default_feature_jitter() -> f64 {
    0.01
}

fn default_region_px() -> usize {
    320
}

fn default_pixel_noise() -> u8 {
    2
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub landmarks: Vec<Landmark>,
    /// Standard deviation of the per-component gaze noise, in pixels.
    pub noise_sigma: f64,
    /// Per-step probability of starting a glance.
    pub glance_rate: f64,
    /// Intensity band of each landmark's texture; empty assigns defaults.
    #[serde(default)]
    pub feature_profile: Vec<(u8, u8)>,
    pub seed: u64,
    /// Glances never come closer than this many steps to a landmark
    /// transition, to either end of the demonstration, or to each other.
    #[serde(default)]
    pub glance_margin_steps: usize,
    /// Per-demo uniform translation of the whole layout, in `[-j, j]` pixels.
    #[serde(default)]
    pub layout_jitter_px: f64,
    /// Per-landmark uniform dwell perturbation, in `[-j, j]` steps.
    #[serde(default)]
    pub dwell_jitter_steps: usize,
    #[serde(default = "default_image_size")]
    pub image_size: (usize, usize),
    #[serde(default = "default_feature_dim")]
    pub feature_dim: usize,
    /// Standard deviation of the per-component feature perturbation.
    #[serde(default = "default_feature_jitter")]
    pub feature_jitter: f64,
    /// Side of the rendered landmark squares, in pixels.
    #[serde(default = "default_region_px")]
    pub region_px: usize,
    /// Uniform per-pixel perturbation amplitude of rendered frames.
    #[serde(default = "default_pixel_noise")]
    pub pixel_noise: u8,
}

impl SynthSpec {
    pub fn new(landmarks: Vec<Landmark>, noise_sigma: f64, glance_rate: f64, seed: u64) -> Self {
        SynthSpec {
            landmarks,
            noise_sigma,
            glance_rate,
            feature_profile: Vec::new(),
            seed,
            glance_margin_steps: 0,
            layout_jitter_px: 0.0,
            dwell_jitter_steps: 0,
            image_size: default_image_size(),
            feature_dim: default_feature_dim(),
            feature_jitter: default_feature_jitter(),
            region_px: default_region_px(),
            pixel_noise: default_pixel_noise(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(format!("synth spec: {msg}")));
        if self.landmarks.is_empty() {
            return bad("at least one landmark required".into());
        }
        if let Some(i) = self.landmarks.iter().position(|l| l.dwell_steps == 0) {
            return bad(format!("landmark {i} has zero dwell"));
        }
        if self
            .landmarks
            .iter()
            .any(|l| l.position.iter().chain(&l.drift_per_step).any(|v| !v.is_finite()))
        {
            return bad("non-finite landmark geometry".into());
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return bad(format!("noise_sigma must be >= 0, got {}", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.glance_rate) {
            return bad(format!("glance_rate must be in [0, 1), got {}", self.glance_rate));
        }
        if !self.feature_profile.is_empty() && self.feature_profile.len() != self.landmarks.len() {
            return bad("feature_profile needs one band per landmark".into());
        }
        if self.feature_profile.iter().any(|(lo, hi)| lo > hi) {
            return bad("feature band with lo > hi".into());
        }
        if !(self.layout_jitter_px.is_finite() && self.layout_jitter_px >= 0.0) {
            return bad("layout_jitter_px must be >= 0".into());
        }
        if self.image_size.0 == 0 || self.image_size.1 == 0 {
            return bad("image size must be positive".into());
        }
        if self.feature_dim < 2 {
            return bad("feature_dim must be >= 2".into());
        }
        if !(self.feature_jitter.is_finite() && self.feature_jitter >= 0.0) {
            return bad("feature_jitter must be >= 0".into());
        }
        let total: usize = self.landmarks.iter().map(|l| l.dwell_steps).sum();
        if total < 2 {
            return bad("demonstration must span at least 2 steps".into());
        }
        Ok(())
    }

    /// Intensity band of landmark `i`.
    pub fn band(&self, i: usize) -> (u8, u8) {
        self.feature_profile.get(i).copied().unwrap_or(BANDS[i % BANDS.len()])
    }
}

/// One generated demonstration.
#[derive(Debug, Clone)]
pub struct SynthDemo {
    pub gaze: GazeSeries,
    pub features: FeatureSeries,
    /// First step of every landmark after the first.
    pub ground_truth: Vec<usize>,
    /// Landmark fixated at each step (glances excluded).
    pub landmark_at: Vec<usize>,
    /// Landmarks after layout jitter and dwell jitter were applied.
    pub layout: Vec<Landmark>,
    pub seed: u64,
}

/// Per-demo seed derived from a spec seed and demo index.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finalizer over a golden-ratio stride
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Ideal normalized histogram of uniform intensities over `band`.
pub fn band_histogram(band: (u8, u8), bins: usize) -> Vec<f64> {
    let mut h = vec![0.0; bins];
    for v in band.0..=band.1 {
        h[v as usize * bins / 256] += 1.0;
    }
    let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
    h.iter().map(|x| x / norm).collect()
}

pub fn generate_demo(spec: &SynthSpec) -> Result<SynthDemo> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let shift = if spec.layout_jitter_px > 0.0 {
        let j = spec.layout_jitter_px;
        (rng.random_range(-j..=j), rng.random_range(-j..=j))
    } else {
        (0.0, 0.0)
    };
    let layout: Vec<Landmark> = spec
        .landmarks
        .iter()
        .map(|l| {
            let dj = spec.dwell_jitter_steps as i64;
            let dwell = if dj > 0 {
                (l.dwell_steps as i64 + rng.random_range(-dj..=dj)).max(1) as usize
            } else {
                l.dwell_steps
            };
            let mut position = l.position;
            position[0] += shift.0;
            position[2] += shift.0;
            position[1] += shift.1;
            position[3] += shift.1;
            Landmark {
                position,
                dwell_steps: dwell,
                drift_per_step: l.drift_per_step,
            }
        })
        .collect();

    let mut landmark_at = Vec::new();
    let mut ground_truth = Vec::new();
    let mut dwell_span = Vec::with_capacity(layout.len());
    for (i, l) in layout.iter().enumerate() {
        if i > 0 {
            ground_truth.push(landmark_at.len());
        }
        dwell_span.push((landmark_at.len(), landmark_at.len() + l.dwell_steps));
        landmark_at.extend(std::iter::repeat_n(i, l.dwell_steps));
    }
    let margin = spec.glance_margin_steps;
    let glance_fits = |t: usize, len: usize, i: usize, prev_end: Option<usize>| {
        let (start, end) = dwell_span[i];
        t >= start + margin && t + len + margin <= end && prev_end.is_none_or(|e| t >= e + margin)
    };
    let mut prev_glance_end = None;

    let noise = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Validation(e.to_string()))?;
    let (img_w, img_h) = (spec.image_size.0 as f64, spec.image_size.1 as f64);
    let mut rows = Vec::with_capacity(landmark_at.len());
    let mut glance: Option<([f64; 4], usize)> = None;
    for (t, &i) in landmark_at.iter().enumerate() {
        let base = layout[i].at(t);
        if glance.is_none() && spec.glance_rate > 0.0 && rng.random::<f64>() < spec.glance_rate {
            let len = rng.random_range(1..=3usize);
            if glance_fits(t, len, i, prev_glance_end) {
                prev_glance_end = Some(t + len);
                let disparity = (base[2] - base[0], base[3] - base[1]);
                let target = loop {
                    let (x, y) = (rng.random_range(0.0..img_w), rng.random_range(0.0..img_h));
                    if ((x - base[0]).powi(2) + (y - base[1]).powi(2)).sqrt() >= GLANCE_MIN_DISTANCE {
                        break [x, y, x + disparity.0, y + disparity.1];
                    }
                };
                glance = Some((target, len));
            }
        }
        let mut g = match &mut glance {
            Some((target, left)) => {
                let g = *target;
                *left -= 1;
                if *left == 0 {
                    glance = None;
                }
                g
            }
            None => base,
        };
        if spec.noise_sigma > 0.0 {
            for c in &mut g {
                *c += noise.sample(&mut rng);
            }
        }
        rows.push(g);
    }
    let gaze = GazeSeries::from_rows(&rows)?;

    let jitter = Normal::new(0.0, spec.feature_jitter).map_err(|e| Error::Validation(e.to_string()))?;
    let ideal: Vec<Vec<f64>> = (0..layout.len())
        .map(|i| band_histogram(spec.band(i), spec.feature_dim))
        .collect();
    let mut perturbed = |base: &[f64]| -> Vec<f64> {
        base.iter()
            .map(|v| {
                if spec.feature_jitter > 0.0 {
                    v + jitter.sample(&mut rng)
                } else {
                    *v
                }
            })
            .collect()
    };
    let frames = landmark_at
        .iter()
        .map(|&i| FeatureFrame::new(perturbed(&ideal[i]), perturbed(&ideal[i])))
        .collect::<Result<Vec<_>>>()?;
    let features = normalize_features(&FeatureSeries::new(frames)?)?;

    Ok(SynthDemo {
        gaze,
        features,
        ground_truth,
        landmark_at,
        layout,
        seed: spec.seed,
    })
}

/// Generate the demo at position `index` of a spec's family.
pub fn generate_indexed(spec: &SynthSpec, index: u64) -> Result<SynthDemo> {
    let mut s = spec.clone();
    s.seed = derive_seed(spec.seed, index);
    generate_demo(&s)
}

fn texture(rng: &mut ChaCha8Rng, n: usize, band: (u8, u8)) -> Vec<u8> {
    (0..n).map(|_| rng.random_range(band.0..=band.1)).collect()
}

/// Render left and right frames for a generated demo.
///
/// Every landmark is a textured square of side `region_px` centered on its
/// current per-eye position; later landmarks are drawn on top.
pub fn render_frames(spec: &SynthSpec, demo: &SynthDemo) -> Result<(Vec<GrayImage>, Vec<GrayImage>)> {
    let (w, h) = spec.image_size;
    let side = spec.region_px;
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(demo.seed, u64::MAX));
    let background = texture(&mut rng, w * h, BACKGROUND_BAND);
    let textures: Vec<Vec<u8>> = (0..demo.layout.len())
        .map(|i| texture(&mut rng, side * side, spec.band(i)))
        .collect();

    let render = |t: usize, eye: usize, rng: &mut ChaCha8Rng| -> Result<GrayImage> {
        let mut img = GrayImage::new(w, h, background.clone())?;
        for (l, tex) in demo.layout.iter().zip(&textures) {
            let p = l.at(t);
            let x0 = p[2 * eye].round() as i64 - (side / 2) as i64;
            let y0 = p[2 * eye + 1].round() as i64 - (side / 2) as i64;
            for dy in 0..side {
                for dx in 0..side {
                    let (x, y) = (x0 + dx as i64, y0 + dy as i64);
                    if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                        img.set(x as usize, y as usize, tex[dy * side + dx]);
                    }
                }
            }
        }
        if spec.pixel_noise > 0 {
            let a = spec.pixel_noise as i16;
            for y in 0..h {
                for x in 0..w {
                    let v = img.get(x, y) as i16 + rng.random_range(-a..=a);
                    img.set(x, y, v.clamp(0, 255) as u8);
                }
            }
        }
        Ok(img)
    };

    let mut left = Vec::with_capacity(demo.gaze.len());
    let mut right = Vec::with_capacity(demo.gaze.len());
    for t in 0..demo.gaze.len() {
        left.push(render(t, 0, &mut rng)?);
        right.push(render(t, 1, &mut rng)?);
    }
    Ok((left, right))
}

/// How feature data is written for each generated demo.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FeatureOutput {
    None,
    /// Direct feature synthesis stored as GZFT.
    #[default]
    Embeddings,
    /// Rendered PGM frames.
    Frames,
}

pub const MANIFEST_NAME: &str = "manifest.json";

/// Write `n_per_spec` demos per spec under `out_dir`, plus a manifest.
///
/// Demos are numbered consecutively across specs (`demo_0000`, ...). Demo `k`
/// of a spec uses seed `derive_seed(spec.seed, k)`.
pub fn generate_dataset(
    specs: &[SynthSpec],
    n_per_spec: usize,
    out_dir: &Path,
    task: &str,
    features: FeatureOutput,
) -> Result<Manifest> {
    if n_per_spec == 0 {
        return Err(Error::Config("n_per_spec must be positive".into()));
    }
    for s in specs {
        s.validate()?;
    }
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let jobs: Vec<(usize, &SynthSpec, usize)> = specs
        .iter()
        .flat_map(|s| (0..n_per_spec).map(move |k| (s, k)))
        .enumerate()
        .map(|(g, (s, k))| (g, s, k))
        .collect();

    let entries = jobs
        .par_iter()
        .map(|&(g, spec, k)| write_demo(spec, k, g, out_dir, features))
        .collect::<Result<Vec<_>>>()?;

    let manifest = Manifest {
        task: task.to_string(),
        demos: entries,
    };
    let path = out_dir.join(MANIFEST_NAME);
    io::write_manifest(&path, &manifest)?;
    // hand back paths resolved the same way a reader would see them
    io::read_manifest(&path)
}

fn write_demo(spec: &SynthSpec, k: usize, g: usize, out_dir: &Path, features: FeatureOutput) -> Result<ManifestEntry> {
    let id = format!("demo_{g:04}");
    let dir = out_dir.join(&id);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let demo = generate_indexed(spec, k as u64)?;
    let rel = |name: &str| PathBuf::from(&id).join(name);

    io::write_gaze_csv(&dir.join("gaze.csv"), &demo.gaze)?;
    io::write_ground_truth(
        &dir.join("ground_truth.json"),
        &GroundTruth {
            demo_id: id.clone(),
            boundaries: demo.ground_truth.clone(),
        },
    )?;
    let mut entry = ManifestEntry {
        id: id.clone(),
        gaze: rel("gaze.csv"),
        features: None,
        frames_left: None,
        frames_right: None,
        ground_truth: Some(rel("ground_truth.json")),
    };
    match features {
        FeatureOutput::None => {}
        FeatureOutput::Embeddings => {
            gzft::write(&dir.join("features.gzft"), &demo.features)?;
            entry.features = Some(rel("features.gzft"));
        }
        FeatureOutput::Frames => {
            let (left, right) = render_frames(spec, &demo)?;
            for (eye, frames) in [("left", &left), ("right", &right)] {
                let fdir = dir.join(format!("frames_{eye}"));
                std::fs::create_dir_all(&fdir).map_err(|e| Error::io(&fdir, e))?;
                for (t, img) in frames.iter().enumerate() {
                    write_pgm(&fdir.join(frame_file_name(eye, t, "pgm")), img)?;
                }
            }
            entry.frames_left = Some(rel("frames_left"));
            entry.frames_right = Some(rel("frames_right"));
        }
    }
    Ok(entry)
}

/// Ready-made task families used by the tests and the `synth` command.
pub mod presets {
    use super::*;

    const DWELL: usize = 55;
    const DWELL_JITTER: usize = 10;
    const LAYOUT_JITTER: f64 = 40.0;
    /// Clear of the widest filter half-window (15) plus the longest glance.
    const GLANCE_MARGIN: usize = 20;

    /// Four-landmark layouts (three transitions). Every consecutive jump is
    /// at least 150 px per eye.
    pub const LAYOUTS: [[(f64, f64); 4]; 4] = [
        [(300.0, 250.0), (700.0, 450.0), (1000.0, 200.0), (500.0, 550.0)],
        [(400.0, 360.0), (550.0, 360.0), (550.0, 200.0), (850.0, 300.0)],
        [(900.0, 500.0), (650.0, 300.0), (350.0, 420.0), (450.0, 200.0)],
        [(640.0, 200.0), (640.0, 520.0), (900.0, 360.0), (380.0, 360.0)],
    ];

    fn spec_for(points: &[(f64, f64)], noise_sigma: f64, glance_rate: f64, seed: u64) -> SynthSpec {
        let landmarks = points.iter().map(|&(x, y)| Landmark::binocular(x, y, DWELL)).collect();
        SynthSpec {
            layout_jitter_px: LAYOUT_JITTER,
            dwell_jitter_steps: DWELL_JITTER,
            glance_margin_steps: GLANCE_MARGIN,
            ..SynthSpec::new(landmarks, noise_sigma, glance_rate, seed)
        }
    }

    /// Clean task: three well-separated transitions per demo.
    pub fn clean(noise_sigma: f64, glance_rate: f64, seed: u64) -> Vec<SynthSpec> {
        LAYOUTS
            .iter()
            .enumerate()
            .map(|(i, l)| spec_for(l, noise_sigma, glance_rate, derive_seed(seed, i as u64)))
            .collect()
    }

    /// Layout whose middle transition produces a noiseless position-score
    /// spike of `spike` (both eyes move by `spike / sqrt 2` along x).
    pub fn attenuated(spike: f64, noise_sigma: f64, glance_rate: f64, seed: u64) -> SynthSpec {
        let step = spike / std::f64::consts::SQRT_2;
        let points = [(300.0, 250.0), (700.0, 450.0), (700.0 + step, 450.0), (400.0, 200.0)];
        spec_for(&points, noise_sigma, glance_rate, seed)
    }

    /// Ten spec families: nine clean ones and one whose middle transition
    /// spike is `attenuation * theta_pos`. With `n_per_spec = 10` this is a
    /// 90 + 10 dataset.
    pub fn heterogeneous(
        theta_pos: f64,
        attenuation: f64,
        noise_sigma: f64,
        glance_rate: f64,
        seed: u64,
    ) -> Vec<SynthSpec> {
        let mut specs: Vec<SynthSpec> = (0..9)
            .map(|i| {
                let layout = &LAYOUTS[i % LAYOUTS.len()];
                spec_for(layout, noise_sigma, glance_rate, derive_seed(seed, i as u64))
            })
            .collect();
        specs.push(attenuated(
            attenuation * theta_pos,
            noise_sigma,
            glance_rate,
            derive_seed(seed, 9),
        ));
        specs
    }
}
