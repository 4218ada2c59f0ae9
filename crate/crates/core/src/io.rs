//! On-disk formats: gaze CSV, dataset manifest, ground truth and
//! segmentation results.
//!
//! Readers reject malformed input instead of repairing it.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::refine::RefinementReport;
use crate::types::{DemoStatus, GazeSample, GazeSeries, DEFAULT_RATE_HZ};

pub const GAZE_HEADER: [&str; 5] = ["t", "left_x", "left_y", "right_x", "right_y"];

/// Format like C's `%.17g`: 17 significant digits, trailing zeros trimmed.
pub fn fmt_g17(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-5..17).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    trim_zeros(&format!("{x:.*}", (16 - exp) as usize)).to_string()
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn format_gaze_csv(gaze: &GazeSeries) -> String {
    let mut out = GAZE_HEADER.join(",");
    out.push('\n');
    for (t, s) in gaze.samples().iter().enumerate() {
        let [a, b, c, d] = s.as_array();
        writeln!(out, "{t},{},{},{},{}", fmt_g17(a), fmt_g17(b), fmt_g17(c), fmt_g17(d)).unwrap();
    }
    out
}

pub fn write_gaze_csv(path: &Path, gaze: &GazeSeries) -> Result<()> {
    std::fs::write(path, format_gaze_csv(gaze)).map_err(|e| Error::io(path, e))
}

pub fn read_gaze_csv(path: &Path) -> Result<GazeSeries> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_gaze_csv(file, path)
}

/// Parse gaze CSV from any reader; `path` is used for error context.
pub fn parse_gaze_csv<R: std::io::Read>(reader: R, path: &Path) -> Result<GazeSeries> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let err = |line: u64, msg: String| Error::Parse {
        path: path.into(),
        line,
        msg,
    };
    let mut records = rdr.records();

    match records.next() {
        Some(Ok(h)) if h.iter().map(str::trim).eq(GAZE_HEADER) => {}
        Some(Ok(h)) => {
            return Err(err(
                1,
                format!(
                    "expected header `{}`, found `{}`",
                    GAZE_HEADER.join(","),
                    h.iter().collect::<Vec<_>>().join(",")
                ),
            ))
        }
        Some(Err(e)) => return Err(err(1, e.to_string())),
        None => return Err(err(1, "missing header".into())),
    }

    let mut samples = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            err(line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 5 {
            return Err(err(line, format!("expected 5 fields, found {}", rec.len())));
        }
        let t: usize = rec[0]
            .trim()
            .parse()
            .map_err(|_| err(line, format!("invalid time step `{}`", &rec[0])))?;
        if t != samples.len() {
            return Err(err(
                line,
                format!("time step gap: expected t = {}, found {t}", samples.len()),
            ));
        }
        let mut v = [0.0; 4];
        for (i, slot) in v.iter_mut().enumerate() {
            let field = rec[i + 1].trim();
            let x: f64 = field
                .parse()
                .map_err(|_| err(line, format!("invalid number `{field}` in {}", GAZE_HEADER[i + 1])))?;
            if !x.is_finite() {
                return Err(err(line, format!("non-finite {} value `{field}`", GAZE_HEADER[i + 1])));
            }
            *slot = x;
        }
        samples.push(GazeSample::from_array(v)?);
    }
    let n = samples.len();
    GazeSeries::new(samples, DEFAULT_RATE_HZ).map_err(|e| err(n as u64 + 1, e.to_string()))
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// Pretty JSON, newline-terminated.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    std::fs::write(path, to_json_string(value)).map_err(|e| Error::io(path, e))
}

/// Known sub-task boundaries of one demonstration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroundTruth {
    pub demo_id: String,
    pub boundaries: Vec<usize>,
}

pub fn read_ground_truth(path: &Path) -> Result<GroundTruth> {
    read_json(path)
}

pub fn write_ground_truth(path: &Path, gt: &GroundTruth) -> Result<()> {
    write_json(path, gt)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub id: String,
    pub gaze: PathBuf,
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub frames_left: Option<PathBuf>,
    #[serde(default)]
    pub frames_right: Option<PathBuf>,
    #[serde(default)]
    pub ground_truth: Option<PathBuf>,
}

impl ManifestEntry {
    pub fn has_feature_source(&self) -> bool {
        self.features.is_some() || (self.frames_left.is_some() && self.frames_right.is_some())
    }
}

/// Dataset index. Paths are as written until [`read_manifest`] resolves them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub task: String,
    pub demos: Vec<ManifestEntry>,
}

/// Read a manifest, resolving relative paths against its directory.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let mut m: Manifest = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new(""));
    let resolve = |p: &mut PathBuf| {
        if p.is_relative() {
            *p = base.join(&*p);
        }
    };
    let mut seen = std::collections::HashSet::new();
    for d in &mut m.demos {
        if !seen.insert(d.id.clone()) {
            return Err(Error::Validation(format!(
                "{}: duplicate demo id `{}`",
                path.display(),
                d.id
            )));
        }
        resolve(&mut d.gaze);
        for p in [
            &mut d.features,
            &mut d.frames_left,
            &mut d.frames_right,
            &mut d.ground_truth,
        ]
        .into_iter()
        .flatten()
        {
            resolve(p);
        }
    }
    Ok(m)
}

pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    write_json(path, manifest)
}

/// One demonstration's entry in a segmentation result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemoRecord {
    pub id: String,
    pub status: DemoStatus,
    pub change_points: Vec<usize>,
    pub theta_pos_final: f64,
    pub theta_feat_final: f64,
    pub iterations: usize,
}

/// Segmentation results for a whole task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentationFile {
    pub task: String,
    pub s: usize,
    pub demos: Vec<DemoRecord>,
}

impl SegmentationFile {
    pub fn from_report(task: &str, report: &RefinementReport) -> Self {
        SegmentationFile {
            task: task.to_string(),
            s: report.s,
            demos: report
                .per_demo
                .iter()
                .map(|d| DemoRecord {
                    id: d.id.clone(),
                    status: d.status,
                    change_points: d.change_points.points().to_vec(),
                    theta_pos_final: d.theta_pos,
                    theta_feat_final: d.theta_feat,
                    iterations: d.iterations,
                })
                .collect(),
        }
    }

    pub fn excluded(&self) -> usize {
        self.demos.iter().filter(|d| d.status == DemoStatus::Excluded).count()
    }
}

pub fn write_segmentation_json(path: &Path, seg: &SegmentationFile) -> Result<()> {
    write_json(path, seg)
}

pub fn read_segmentation_json(path: &Path) -> Result<SegmentationFile> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse(text: &str) -> Result<GazeSeries> {
        parse_gaze_csv(text.as_bytes(), Path::new("g.csv"))
    }

    #[test]
    fn g17_matches_printf() {
        assert_eq!(fmt_g17(0.1), "0.10000000000000001");
        assert_eq!(fmt_g17(5.0), "5");
        assert_eq!(fmt_g17(-2.5), "-2.5");
        assert_eq!(fmt_g17(1e20), "1e+20");
        assert_eq!(fmt_g17(1.5e-7), "1.4999999999999999e-07");
        assert_eq!(fmt_g17(123456.789), "123456.789");
        assert_eq!(fmt_g17(0.0001), "0.0001");
        assert_eq!(fmt_g17(1e16), "10000000000000000");
        assert_eq!(fmt_g17(1e17), "1e+17");
    }

    #[test]
    fn reads_well_formed_file() {
        let g = parse("t,left_x,left_y,right_x,right_y\n0,1,2,3,4\n1,1.5,2,3,4\n2,0,0,0,0\n").unwrap();
        assert_eq!(g.len(), 3);
        assert_eq!(g.samples()[1].left_x(), 1.5);
        assert_eq!(g.samples()[0].right_y(), 4.0);
    }

    #[test]
    fn gap_names_line() {
        let mut text = String::from("t,left_x,left_y,right_x,right_y\n");
        for t in [0, 1, 2, 3, 4, 6] {
            text.push_str(&format!("{t},0,0,0,0\n"));
        }
        match parse(&text) {
            Err(Error::Parse { line: 7, msg, .. }) => assert!(msg.contains("gap"), "{msg}"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_inputs_rejected() {
        assert!(matches!(
            parse("0,1,2,3,4\n1,1,2,3,4\n"),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(parse(""), Err(Error::Parse { line: 1, .. })));
        let h = "t,left_x,left_y,right_x,right_y\n";
        assert!(matches!(
            parse(&format!("{h}0,1,2,3,NaN\n1,0,0,0,0\n")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse(&format!("{h}0,1,2,3,4\n1,0,0,inf,0\n")),
            Err(Error::Parse { line: 3, .. })
        ));
        assert!(matches!(
            parse(&format!("{h}0,1,2,3\n")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            parse(&format!("{h}1,1,2,3,4\n")),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(parse(&format!("{h}0,1,2,3,4\n")), Err(Error::Parse { .. })));
    }

    #[test]
    fn manifest_paths_resolved() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        std::fs::write(
            &path,
            r#"{"task": "t", "demos": [
                {"id": "a", "gaze": "a/gaze.csv", "features": null, "frames_left": null, "frames_right": null, "ground_truth": "a/gt.json"},
                {"id": "b", "gaze": "/abs/gaze.csv", "features": "b.gzft", "frames_left": null, "frames_right": null, "ground_truth": null}
            ]}"#,
        )
        .unwrap();
        let m = read_manifest(&path).unwrap();
        assert_eq!(m.demos.len(), 2);
        assert_eq!(m.demos[0].gaze, dir.path().join("a/gaze.csv"));
        assert_eq!(m.demos[0].ground_truth, Some(dir.path().join("a/gt.json")));
        assert!(!m.demos[0].has_feature_source());
        assert_eq!(m.demos[1].gaze, PathBuf::from("/abs/gaze.csv"));
        assert!(m.demos[1].has_feature_source());
    }

    #[test]
    fn manifest_unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        std::fs::write(
            &path,
            r#"{"task": "t", "demos": [{"id": "a", "gaze": "g.csv", "featurs": null}]}"#,
        )
        .unwrap();
        let err = read_manifest(&path).unwrap_err().to_string();
        assert!(err.contains("featurs"), "{err}");

        std::fs::write(
            &path,
            r#"{"task": "t", "demos": [{"id": "a", "gaze": "g"}, {"id": "a", "gaze": "h"}]}"#,
        )
        .unwrap();
        assert!(read_manifest(&path).is_err());
    }

    #[test]
    fn segmentation_json_layout() {
        let seg = SegmentationFile {
            task: "demo".into(),
            s: 1,
            demos: vec![
                DemoRecord {
                    id: "a".into(),
                    status: DemoStatus::Ok,
                    change_points: vec![],
                    theta_pos_final: 50.0,
                    theta_feat_final: 0.03,
                    iterations: 0,
                },
                DemoRecord {
                    id: "b".into(),
                    status: DemoStatus::Excluded,
                    change_points: vec![3, 9],
                    theta_pos_final: 55.5,
                    theta_feat_final: 0.0333,
                    iterations: 500,
                },
            ],
        };
        let text = to_json_string(&seg);
        assert!(text.ends_with("}\n"));
        assert!(text.contains("\"change_points\": []"));
        assert!(text.contains("\"status\": \"excluded\""));
        let keys = [
            "\"task\"",
            "\"s\"",
            "\"demos\"",
            "\"id\"",
            "\"status\"",
            "\"change_points\"",
            "\"theta_pos_final\"",
            "\"theta_feat_final\"",
            "\"iterations\"",
        ];
        let pos: Vec<usize> = keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{text}");
        let back: SegmentationFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, seg);
        assert_eq!(to_json_string(&back), text);
    }

    proptest! {
        #[test]
        fn gaze_csv_round_trip(rows in prop::collection::vec(prop::array::uniform4(-1e4f64..1e4), 2..30)) {
            let g = GazeSeries::from_rows(&rows).unwrap();
            let text = format_gaze_csv(&g);
            let back = parse(&text).unwrap();
            prop_assert_eq!(&back, &g);
            prop_assert_eq!(format_gaze_csv(&back), text);
        }

        #[test]
        fn g17_round_trips(x in any::<f64>().prop_filter("finite", |x| x.is_finite())) {
            prop_assert_eq!(fmt_g17(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }
}
