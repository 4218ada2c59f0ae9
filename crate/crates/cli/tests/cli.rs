use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gazeseg::eval::evaluate;
use gazeseg::io;
use gazeseg::pipeline::{self, load_dataset, load_ground_truth, segment_manifest};
use gazeseg::sweep::{format_sweep_csv, sweep, SweepGrid};
use gazeseg::synth::{generate_dataset, presets, FeatureOutput, Landmark, SynthSpec, MANIFEST_NAME};
use gazeseg::{DetectionConfig, DetectionMode, GazeSeries};

fn gazeseg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gazeseg")).args(args).output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn clean_dataset(dir: &Path, features: FeatureOutput) -> PathBuf {
    generate_dataset(&presets::clean(5.0, 0.02, 3), 2, dir, "clean", features).unwrap();
    dir.join(MANIFEST_NAME)
}

fn heterogeneous_dataset(dir: &Path) -> PathBuf {
    generate_dataset(
        &presets::heterogeneous(50.0, 0.7, 3.0, 0.02, 4),
        1,
        dir,
        "h",
        FeatureOutput::None,
    )
    .unwrap();
    dir.join(MANIFEST_NAME)
}

#[test]
fn segment_defaults_on_clean_dataset_exit_zero() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = clean_dataset(dir.path(), FeatureOutput::Embeddings);
    let out = gazeseg(&["segment", s(&manifest)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let seg: io::SegmentationFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(seg.s, 3);
    assert_eq!(seg.excluded(), 0);
}

#[test]
fn segment_output_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = heterogeneous_dataset(dir.path());
    let cases: [(&[&str], DetectionConfig); 3] = [
        (
            &["--mode", "pos-only"],
            DetectionConfig {
                mode: DetectionMode::PosOnly,
                ..DetectionConfig::default()
            },
        ),
        (
            &["--mode", "pos-only", "--no-refine"],
            DetectionConfig {
                mode: DetectionMode::PosOnly,
                refine: false,
                ..DetectionConfig::default()
            },
        ),
        (
            &[
                "--mode",
                "pos-only",
                "-w",
                "15",
                "--theta-pos",
                "75",
                "--scale-down",
                "0.98",
                "--max-iters",
                "300",
            ],
            DetectionConfig {
                mode: DetectionMode::PosOnly,
                window_w: 15,
                theta_pos: 75.0,
                scale_down: 0.98,
                max_iters: 300,
                ..DetectionConfig::default()
            },
        ),
    ];
    for (flags, config) in cases {
        let out_path = dir.path().join("seg.json");
        let mut args = vec!["segment", s(&manifest), "--out", s(&out_path)];
        args.extend_from_slice(flags);
        let out = gazeseg(&args);
        assert!(
            out.status.success(),
            "{flags:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let expected = io::to_json_string(&segment_manifest(&manifest, &config).unwrap());
        assert_eq!(std::fs::read_to_string(&out_path).unwrap(), expected, "{flags:?}");
    }
}

#[test]
fn refine_flag_pair_last_one_wins() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = heterogeneous_dataset(dir.path());
    let run = |flags: &[&str]| {
        let mut args = vec!["segment", s(&manifest), "--mode", "pos-only"];
        args.extend_from_slice(flags);
        gazeseg(&args).stdout
    };
    assert_eq!(run(&["--no-refine", "--refine"]), run(&[]));
    assert_eq!(run(&["--refine", "--no-refine"]), run(&["--no-refine"]));
    assert_ne!(run(&["--no-refine"]), run(&[]));
}

#[test]
fn job_count_does_not_change_output() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = clean_dataset(dir.path(), FeatureOutput::Embeddings);
    let one = gazeseg(&["--jobs", "1", "segment", s(&manifest)]);
    let many = gazeseg(&["segment", s(&manifest), "--jobs", "4"]);
    assert!(one.status.success() && many.status.success());
    assert_eq!(one.stdout, many.stdout);
}

#[test]
fn feature_mode_without_features_exits_one_with_demo_and_stage() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = clean_dataset(dir.path(), FeatureOutput::None);
    for mode in ["both", "feat-only"] {
        let out = gazeseg(&["segment", s(&manifest), "--mode", mode]);
        assert_eq!(out.status.code(), Some(1));
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("demo_0000") && err.contains("features"), "{err}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn invalid_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = clean_dataset(dir.path(), FeatureOutput::None);
    for flags in [["--theta-pos=-1"], ["--scale-up=0.5"], ["--window=0"]] {
        let mut args = vec!["segment", s(&manifest), "--mode", "pos-only"];
        args.extend_from_slice(&flags);
        assert_eq!(gazeseg(&args).status.code(), Some(1), "{flags:?}");
    }
    assert_eq!(
        gazeseg(&["segment", "/nonexistent/manifest.json"]).status.code(),
        Some(1)
    );
}

#[test]
fn usage_errors_exit_one_and_help_exits_zero() {
    assert_eq!(gazeseg(&["segment"]).status.code(), Some(1));
    assert_eq!(
        gazeseg(&["segment", "m.json", "--mode", "sideways"]).status.code(),
        Some(1)
    );
    assert_eq!(gazeseg(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(gazeseg(&["--help"]).status.code(), Some(0));
    assert_eq!(gazeseg(&["--version"]).status.code(), Some(0));
}

#[test]
fn exclusions_exit_two_and_are_summarized() {
    let dir = tempfile::tempdir().unwrap();
    let mut manifest = io::Manifest {
        task: "mixed".into(),
        demos: Vec::new(),
    };
    let jump = |t: usize| {
        if t < 30 {
            [100.0, 100.0, 90.0, 100.0]
        } else {
            [400.0, 100.0, 390.0, 100.0]
        }
    };
    for (id, flat) in [("a", false), ("b", false), ("c", true)] {
        let rows: Vec<[f64; 4]> = (0..60).map(|t| if flat { jump(0) } else { jump(t) }).collect();
        let path = dir.path().join(format!("{id}.csv"));
        io::write_gaze_csv(&path, &GazeSeries::from_rows(&rows).unwrap()).unwrap();
        manifest.demos.push(io::ManifestEntry {
            id: id.into(),
            gaze: path.file_name().unwrap().into(),
            features: None,
            frames_left: None,
            frames_right: None,
            ground_truth: None,
        });
    }
    let path = dir.path().join(MANIFEST_NAME);
    io::write_manifest(&path, &manifest).unwrap();

    let out = gazeseg(&["segment", s(&path), "--mode", "pos-only", "--max-iters", "50"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("1 excluded") && err.contains(": c"), "{err}");
    let seg: io::SegmentationFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(seg.demos[2].status, gazeseg::DemoStatus::Excluded);
}

#[test]
fn eval_matches_library_for_manifest_and_array_truth() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = heterogeneous_dataset(dir.path());
    let seg_path = dir.path().join("seg.json");
    assert!(gazeseg(&[
        "segment",
        s(&manifest),
        "--mode",
        "pos-only",
        "--no-refine",
        "--out",
        s(&seg_path)
    ])
    .status
    .success());

    let truth = load_ground_truth(&io::read_manifest(&manifest).unwrap()).unwrap();
    let truth_path = dir.path().join("truth.json");
    std::fs::write(&truth_path, serde_json::to_string(&truth).unwrap()).unwrap();
    let seg = io::read_segmentation_json(&seg_path).unwrap();
    let expected = io::to_json_string(&evaluate(&seg, &truth, 4).unwrap());

    for t in [&manifest, &truth_path] {
        let out = gazeseg(&["eval", s(&seg_path), s(t), "--tolerance", "4"]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        assert_eq!(String::from_utf8(out.stdout).unwrap(), expected);
    }
    let m: gazeseg::eval::EvalMetrics = serde_json::from_str(&expected).unwrap();
    assert_eq!(m.minority, 1);
}

#[test]
fn eval_rejects_misaligned_ids() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = heterogeneous_dataset(dir.path());
    let seg_path = dir.path().join("seg.json");
    gazeseg(&["segment", s(&manifest), "--mode", "pos-only", "--out", s(&seg_path)]);
    let truth_path = dir.path().join("truth.json");
    std::fs::write(&truth_path, r#"[{"demo_id": "someone_else", "boundaries": [1]}]"#).unwrap();
    let out = gazeseg(&["eval", s(&seg_path), s(&truth_path)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("someone_else"));
}

#[test]
fn sweep_matches_library_and_single_cell_equals_segment() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = heterogeneous_dataset(dir.path());
    let out = gazeseg(&[
        "sweep",
        s(&manifest),
        "--mode",
        "pos-only",
        "--windows",
        "10,20",
        "--thetas",
        "50,100",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let m = io::read_manifest(&manifest).unwrap();
    let dataset = load_dataset(&m, false).unwrap();
    let truth = load_ground_truth(&m).unwrap();
    let base = DetectionConfig {
        mode: DetectionMode::PosOnly,
        ..DetectionConfig::default()
    };
    let grid = SweepGrid {
        windows: vec![10, 20],
        theta_pos: vec![50.0, 100.0],
        refine: vec![false, true],
    };
    let expected = format_sweep_csv(&sweep(&dataset, &truth, &base, &grid, 10));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(csv, expected);
    assert_eq!(csv.lines().count(), 1 + 8);

    // 1x1 grid against a plain segment + eval run
    let one = gazeseg(&[
        "sweep",
        s(&manifest),
        "--mode",
        "pos-only",
        "--windows",
        "15",
        "--thetas",
        "75",
        "--refine-grid",
        "true",
    ]);
    let seg_path = dir.path().join("seg.json");
    gazeseg(&[
        "segment",
        s(&manifest),
        "--mode",
        "pos-only",
        "-w",
        "15",
        "--theta-pos",
        "75",
        "--out",
        s(&seg_path),
    ]);
    let metrics = gazeseg(&["eval", s(&seg_path), s(&manifest)]);
    let metrics: gazeseg::eval::EvalMetrics = serde_json::from_slice(&metrics.stdout).unwrap();
    assert_eq!(
        String::from_utf8(one.stdout).unwrap(),
        format!(
            "w,theta_pos,refine,n_correct,n_excluded\n15,75,true,{},{}\n",
            metrics.majority, metrics.excluded
        )
    );
}

#[test]
fn synth_matches_library_generation() {
    let dir = tempfile::tempdir().unwrap();
    let cli_dir = dir.path().join("cli");
    let out = gazeseg(&[
        "synth",
        "--out",
        s(&cli_dir),
        "--preset",
        "heterogeneous",
        "-n",
        "1",
        "--seed",
        "9",
        "--noise-sigma",
        "3",
        "--features",
        "none",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let lib_dir = dir.path().join("lib");
    generate_dataset(
        &presets::heterogeneous(50.0, 0.7, 3.0, 0.02, 9),
        1,
        &lib_dir,
        "heterogeneous",
        FeatureOutput::None,
    )
    .unwrap();
    for rel in [
        "manifest.json",
        "demo_0000/gaze.csv",
        "demo_0009/gaze.csv",
        "demo_0009/ground_truth.json",
    ] {
        assert_eq!(
            std::fs::read(cli_dir.join(rel)).unwrap(),
            std::fs::read(lib_dir.join(rel)).unwrap(),
            "{rel}"
        );
    }
}

#[test]
fn synth_spec_file_then_extract_then_segment() {
    let dir = tempfile::tempdir().unwrap();
    let spec = SynthSpec {
        image_size: (320, 240),
        region_px: 96,
        ..SynthSpec::new(
            vec![
                Landmark::binocular(80.0, 80.0, 25),
                Landmark::binocular(240.0, 80.0, 25),
                Landmark::binocular(160.0, 180.0, 25),
            ],
            1.0,
            0.0,
            21,
        )
    };
    let spec_path = dir.path().join("spec.json");
    std::fs::write(&spec_path, serde_json::to_string(&[spec]).unwrap()).unwrap();

    let raw = dir.path().join("raw");
    let out = gazeseg(&[
        "synth",
        "--spec",
        s(&spec_path),
        "-n",
        "2",
        "--features",
        "frames",
        "--out",
        s(&raw),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let emb = dir.path().join("emb");
    let out = gazeseg(&["extract", s(&raw.join(MANIFEST_NAME)), "--out", s(&emb), "-b", "64"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let config = DetectionConfig {
        patch_b: 64,
        ..DetectionConfig::default()
    };
    let lib = pipeline::extract_manifest(
        &io::read_manifest(&raw.join(MANIFEST_NAME)).unwrap(),
        &config,
        &dir.path().join("lib"),
    )
    .unwrap();
    for d in &lib.demos {
        let name = d.features.as_ref().unwrap().file_name().unwrap();
        assert_eq!(
            std::fs::read(emb.join(name)).unwrap(),
            std::fs::read(d.features.as_ref().unwrap()).unwrap()
        );
    }

    let out = gazeseg(&["segment", s(&emb.join(MANIFEST_NAME)), "-b", "64"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let seg: io::SegmentationFile = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(seg.s, 2);
    assert!(seg.demos.iter().all(|d| d.change_points == [25, 50]));
}

#[test]
fn help_lists_subcommands() {
    let out = gazeseg(&["--help"]);
    let text = String::from_utf8(out.stdout).unwrap();
    for cmd in ["synth", "extract", "segment", "eval", "sweep"] {
        assert!(text.contains(cmd), "{text}");
    }
}
