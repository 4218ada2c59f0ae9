//! `gazeseg` command-line interface.
//!
//! Exit codes: 0 on success, 2 when segmentation completed but excluded at
//! least one demonstration, 1 on any error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use gazeseg::eval::evaluate;
use gazeseg::io::{self, SegmentationFile};
use gazeseg::pipeline::{self, load_dataset, load_ground_truth};
use gazeseg::sweep::{format_sweep_csv, sweep, SweepGrid, GRID_THETA_POS, GRID_WINDOWS};
use gazeseg::synth::{generate_dataset, presets, FeatureOutput, SynthSpec, MANIFEST_NAME};
use gazeseg::{DetectionConfig, DetectionMode};

#[derive(Parser)]
#[command(name = "gazeseg", version, about = "Gaze-based task decomposition of demonstrations")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with ground truth.
    Synth(SynthArgs),
    /// Extract per-step features from stored frames into GZFT files.
    Extract(ExtractArgs),
    /// Detect (and refine) change points for every demo of a manifest.
    Segment(SegmentArgs),
    /// Score a segmentation against ground truth.
    Eval(EvalArgs),
    /// Segment and evaluate over a grid of window sizes and thresholds.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Both,
    PosOnly,
    FeatOnly,
}

impl From<Mode> for DetectionMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Both => DetectionMode::Both,
            Mode::PosOnly => DetectionMode::PosOnly,
            Mode::FeatOnly => DetectionMode::FeatOnly,
        }
    }
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Median filter window width, in steps.
    #[arg(short = 'w', long = "window", default_value_t = gazeseg::DEFAULT_WINDOW)]
    window: usize,
    /// Square patch side for frame features, in pixels.
    #[arg(short = 'b', long = "patch-size", default_value_t = gazeseg::DEFAULT_PATCH)]
    patch_size: usize,
    #[arg(long, default_value_t = gazeseg::DEFAULT_THETA_POS)]
    theta_pos: f64,
    #[arg(long, default_value_t = gazeseg::DEFAULT_THETA_FEAT)]
    theta_feat: f64,
    #[arg(long, value_enum, default_value = "both")]
    mode: Mode,
    /// Rescale thresholds per demo until every demo has the modal count.
    #[arg(long, overrides_with = "no_refine")]
    refine: bool,
    #[arg(long, overrides_with = "refine")]
    no_refine: bool,
    #[arg(long, default_value_t = gazeseg::DEFAULT_MAX_ITERS)]
    max_iters: usize,
    #[arg(long, default_value_t = gazeseg::DEFAULT_SCALE_DOWN)]
    scale_down: f64,
    #[arg(long, default_value_t = gazeseg::DEFAULT_SCALE_UP)]
    scale_up: f64,
}

impl ConfigArgs {
    fn config(&self) -> Result<DetectionConfig> {
        let config = DetectionConfig {
            window_w: self.window,
            patch_b: self.patch_size,
            theta_pos: self.theta_pos,
            theta_feat: self.theta_feat,
            mode: self.mode.into(),
            refine: !self.no_refine,
            scale_down: self.scale_down,
            scale_up: self.scale_up,
            max_iters: self.max_iters,
            ..DetectionConfig::default()
        };
        config.validate()?;
        Ok(config)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Four layouts, three well-separated transitions each.
    Clean,
    /// Nine clean layouts plus one with an attenuated middle transition.
    Heterogeneous,
}

#[derive(Clone, Copy, ValueEnum)]
enum Features {
    None,
    Embeddings,
    Frames,
}

impl From<Features> for FeatureOutput {
    fn from(f: Features) -> Self {
        match f {
            Features::None => FeatureOutput::None,
            Features::Embeddings => FeatureOutput::Embeddings,
            Features::Frames => FeatureOutput::Frames,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory; receives one folder per demo and manifest.json.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "clean", conflicts_with = "spec")]
    preset: Preset,
    /// JSON file holding one spec or an array of specs, instead of a preset.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Demos per spec (defaults: 25 for clean, 10 otherwise).
    #[arg(short = 'n', long)]
    n_per_spec: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5.0)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 0.02)]
    glance_rate: f64,
    /// Attenuated spike height as a fraction of --theta-pos (heterogeneous).
    #[arg(long, default_value_t = 0.7)]
    attenuation: f64,
    #[arg(long, default_value_t = gazeseg::DEFAULT_THETA_POS)]
    theta_pos: f64,
    #[arg(long, value_enum, default_value = "embeddings")]
    features: Features,
    /// Task name written into the manifest.
    #[arg(long)]
    task: Option<String>,
}

#[derive(Args)]
struct ExtractArgs {
    manifest: PathBuf,
    /// Directory for the GZFT files and the updated manifest.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SegmentArgs {
    manifest: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
    /// Write the segmentation JSON here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    segmentation: PathBuf,
    /// Manifest with ground_truth paths, or a JSON array of ground-truth records.
    truth: PathBuf,
    #[arg(long, default_value_t = gazeseg::DEFAULT_WINDOW / 2)]
    tolerance: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    manifest: PathBuf,
    /// Window sizes (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = GRID_WINDOWS)]
    windows: Vec<usize>,
    /// Position thresholds (comma separated).
    #[arg(long, value_delimiter = ',', default_values_t = GRID_THETA_POS)]
    thetas: Vec<f64>,
    /// Refinement settings to sweep (comma separated booleans).
    #[arg(long, value_delimiter = ',', default_values_t = [false, true])]
    refine_grid: Vec<bool>,
    #[arg(long, default_value_t = gazeseg::DEFAULT_WINDOW / 2)]
    tolerance: usize,
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn read_specs(path: &Path) -> Result<Vec<SynthSpec>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let specs = if value.is_array() {
        serde_json::from_value(value)
    } else {
        serde_json::from_value(value).map(|s| vec![s])
    };
    specs.with_context(|| format!("{}: not a synth spec", path.display()))
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let (specs, default_n, default_task) = match (&args.spec, args.preset) {
        (Some(path), _) => (read_specs(path)?, 1, "synthetic"),
        (None, Preset::Clean) => (
            presets::clean(args.noise_sigma, args.glance_rate, args.seed),
            25,
            "clean",
        ),
        (None, Preset::Heterogeneous) => (
            presets::heterogeneous(
                args.theta_pos,
                args.attenuation,
                args.noise_sigma,
                args.glance_rate,
                args.seed,
            ),
            10,
            "heterogeneous",
        ),
    };
    let task = args.task.as_deref().unwrap_or(default_task);
    let manifest = generate_dataset(
        &specs,
        args.n_per_spec.unwrap_or(default_n),
        &args.out,
        task,
        args.features.into(),
    )?;
    eprintln!(
        "wrote {} demos to {}",
        manifest.demos.len(),
        args.out.join(MANIFEST_NAME).display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_extract(args: ExtractArgs) -> Result<ExitCode> {
    let config = args.config.config()?;
    let manifest = io::read_manifest(&args.manifest)?;
    let out = pipeline::extract_manifest(&manifest, &config, &args.out)?;
    let path = args.out.join(MANIFEST_NAME);
    io::write_manifest(&path, &out)?;
    eprintln!(
        "extracted features for {} demos, manifest {}",
        out.demos.len(),
        path.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_segment(args: SegmentArgs) -> Result<ExitCode> {
    let config = args.config.config()?;
    let seg = pipeline::segment_manifest(&args.manifest, &config)?;
    emit(args.out.as_deref(), &io::to_json_string(&seg))?;
    Ok(summarize(&seg))
}

fn summarize(seg: &SegmentationFile) -> ExitCode {
    let excluded: Vec<&str> = seg
        .demos
        .iter()
        .filter(|d| d.status == gazeseg::DemoStatus::Excluded)
        .map(|d| d.id.as_str())
        .collect();
    eprintln!(
        "{} demos, s = {}, {} excluded{}",
        seg.demos.len(),
        seg.s,
        excluded.len(),
        if excluded.is_empty() {
            String::new()
        } else {
            format!(": {}", excluded.join(", "))
        }
    );
    if excluded.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn cmd_eval(args: EvalArgs) -> Result<ExitCode> {
    let seg = io::read_segmentation_json(&args.segmentation)?;
    let truth = pipeline::read_truth(&args.truth)?;
    let metrics = evaluate(&seg, &truth, args.tolerance)?;
    emit(args.out.as_deref(), &io::to_json_string(&metrics))?;
    eprintln!(
        "majority {}/{}, minority {}, excluded {}",
        metrics.majority, metrics.n_demos, metrics.minority, metrics.excluded
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_sweep(args: SweepArgs) -> Result<ExitCode> {
    if args.windows.is_empty() || args.thetas.is_empty() || args.refine_grid.is_empty() {
        bail!("sweep grid is empty");
    }
    let base = args.config.config()?;
    let manifest = io::read_manifest(&args.manifest)?;
    let dataset = load_dataset(&manifest, base.mode.uses_features())?;
    let truth = load_ground_truth(&manifest)?;
    let grid = SweepGrid {
        windows: args.windows,
        theta_pos: args.thetas,
        refine: args.refine_grid,
    };
    let rows = sweep(&dataset, &truth, &base, &grid, args.tolerance);
    emit(args.out.as_deref(), &format_sweep_csv(&rows))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    if let Some(n) = cli.jobs {
        if n == 0 {
            bail!("--jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Segment(a) => cmd_segment(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

/// Error chain on one line. Library errors already embed their cause, so
/// causes repeated verbatim by the previous message are skipped.
fn render(e: &anyhow::Error) -> String {
    let mut out = String::new();
    let mut prev = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !prev.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
        prev = msg;
    }
    out
}

fn main() -> ExitCode {
    // clap's own exit code for usage errors is 2, which means "excluded" here
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", render(&e));
            ExitCode::FAILURE
        }
    }
}
