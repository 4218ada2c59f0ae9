//! GZFT: little-endian container for per-step left/right feature vectors.
//!
//! ```text
//! offset  size  field
//! 0       4     magic "GZFT"
//! 4       4     u32 version (1)
//! 8       4     u32 frame count (T + 1)
//! 12      4     u32 feature dimension D
//! 16      4     u32 stream count (2: left, right)
//! 20      ...   f32 payload [t][stream][d], (T + 1) * 2 * D values
//! ```

use std::path::Path;

use crate::error::{Error, Result};
use crate::signal::normalize_features;
use crate::types::{FeatureFrame, FeatureSeries};

pub const MAGIC: &[u8; 4] = b"GZFT";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;
const STREAMS: u32 = 2;

pub fn encode(features: &FeatureSeries) -> Result<Vec<u8>> {
    let d = features.dim();
    if let Some((t, f)) = features.frames().iter().enumerate().find(|(_, f)| f.dim() != d) {
        return Err(Error::DimensionMismatch {
            t,
            expected: d,
            found: f.dim(),
        });
    }
    let mut out = Vec::with_capacity(HEADER_LEN + features.len() * 2 * d * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(features.len() as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.extend_from_slice(&STREAMS.to_le_bytes());
    for frame in features.frames() {
        for v in frame.left().iter().chain(frame.right()) {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

/// Decode without normalizing. `path` is only used for error context.
pub fn decode(bytes: &[u8], path: &Path) -> Result<FeatureSeries> {
    let fmt_err = |offset: usize, msg: String| Error::Format {
        path: path.into(),
        offset: offset as u64,
        msg,
    };
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            path: path.into(),
            expected: HEADER_LEN as u64,
            actual: bytes.len() as u64,
        });
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap());

    if &bytes[..4] != MAGIC {
        return Err(fmt_err(0, format!("bad magic {:?}, expected \"GZFT\"", &bytes[..4])));
    }
    let version = word(4);
    if version != VERSION {
        return Err(fmt_err(4, format!("unsupported version {version}")));
    }
    let frames = word(8) as usize;
    if frames == 0 {
        return Err(fmt_err(8, "frame count is zero".into()));
    }
    let dim = word(12) as usize;
    if dim == 0 {
        return Err(fmt_err(12, "feature dimension is zero".into()));
    }
    let streams = word(16);
    if streams != STREAMS {
        return Err(fmt_err(16, format!("expected 2 streams, found {streams}")));
    }

    let expected = HEADER_LEN as u64 + frames as u64 * 2 * dim as u64 * 4;
    if bytes.len() as u64 != expected {
        if (bytes.len() as u64) < expected {
            return Err(Error::Truncated {
                path: path.into(),
                expected,
                actual: bytes.len() as u64,
            });
        }
        return Err(fmt_err(
            expected as usize,
            format!("{} trailing bytes after payload", bytes.len() as u64 - expected),
        ));
    }

    let mut out = Vec::with_capacity(frames);
    let mut offset = HEADER_LEN;
    let read_vec = |offset: &mut usize| -> Result<Vec<f64>> {
        let mut v = Vec::with_capacity(dim);
        for _ in 0..dim {
            let x = f32::from_le_bytes(bytes[*offset..*offset + 4].try_into().unwrap());
            if !x.is_finite() {
                return Err(fmt_err(*offset, format!("non-finite value {x}")));
            }
            v.push(x as f64);
            *offset += 4;
        }
        Ok(v)
    };
    for _ in 0..frames {
        let left = read_vec(&mut offset)?;
        let right = read_vec(&mut offset)?;
        out.push(FeatureFrame::new(left, right)?);
    }
    FeatureSeries::new(out)
}

pub fn write(path: &Path, features: &FeatureSeries) -> Result<()> {
    std::fs::write(path, encode(features)?).map_err(|e| Error::io(path, e))
}

/// Read a GZFT file and L2-normalize every vector.
pub fn ingest_embeddings(path: &Path) -> Result<FeatureSeries> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    normalize_features(&decode(&bytes, path)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::path::PathBuf;

    fn sample() -> FeatureSeries {
        FeatureSeries::new(vec![
            FeatureFrame::new(vec![1.0, 0.0, 0.5], vec![0.0, 1.0, 0.25]).unwrap(),
            FeatureFrame::new(vec![0.5, 0.5, 0.5], vec![-1.0, 0.0, 2.0]).unwrap(),
        ])
        .unwrap()
    }

    fn p() -> PathBuf {
        PathBuf::from("x.gzft")
    }

    #[test]
    fn header_layout() {
        let bytes = encode(&sample()).unwrap();
        assert_eq!(&bytes[..4], b"GZFT");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[8..12], &[2, 0, 0, 0]);
        assert_eq!(&bytes[12..16], &[3, 0, 0, 0]);
        assert_eq!(&bytes[16..20], &[2, 0, 0, 0]);
        assert_eq!(bytes.len(), 20 + 2 * 2 * 3 * 4);
        // t=1, right stream, d=2
        let at = 20 + (2 * 3 + 3 + 2) * 4;
        assert_eq!(&bytes[at..at + 4], &2.0f32.to_le_bytes());
        assert_eq!(decode(&bytes, &p()).unwrap(), sample());
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = encode(&sample()).unwrap();
        bytes[0] = b'X';
        assert!(matches!(decode(&bytes, &p()), Err(Error::Format { offset: 0, .. })));
        let mut bytes = encode(&sample()).unwrap();
        bytes[4] = 2;
        assert!(matches!(decode(&bytes, &p()), Err(Error::Format { offset: 4, .. })));
        let mut bytes = encode(&sample()).unwrap();
        bytes[16] = 3;
        assert!(matches!(decode(&bytes, &p()), Err(Error::Format { offset: 16, .. })));
    }

    #[test]
    fn truncated_payload_names_byte_counts() {
        let bytes = encode(&sample()).unwrap();
        let cut = &bytes[..bytes.len() - 5];
        match decode(cut, &p()) {
            Err(Error::Truncated { expected, actual, .. }) => {
                assert_eq!(expected, 68);
                assert_eq!(actual, 63);
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            decode(&bytes[..10], &p()),
            Err(Error::Truncated {
                expected: 20,
                actual: 10,
                ..
            })
        ));
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(decode(&long, &p()), Err(Error::Format { offset: 68, .. })));
    }

    #[test]
    fn nan_payload_names_offset() {
        let mut bytes = encode(&sample()).unwrap();
        bytes[28..32].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(decode(&bytes, &p()), Err(Error::Format { offset: 28, .. })));
    }

    #[test]
    fn ingest_normalizes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.gzft");
        write(&path, &sample()).unwrap();
        let f = ingest_embeddings(&path).unwrap();
        for frame in f.frames() {
            for v in [frame.left(), frame.right()] {
                assert!((v.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn round_trip(rows in prop::collection::vec(prop::collection::vec(-10.0f32..10.0, 8), 1..12)) {
            let frames: Vec<FeatureFrame> = rows
                .iter()
                .map(|r| FeatureFrame::new(
                    r[..4].iter().map(|&x| x as f64).collect(),
                    r[4..].iter().map(|&x| x as f64).collect(),
                ).unwrap())
                .collect();
            let series = FeatureSeries::new(frames).unwrap();
            let bytes = encode(&series).unwrap();
            let back = decode(&bytes, &p()).unwrap();
            prop_assert_eq!(&back, &series);
            prop_assert_eq!(encode(&back).unwrap(), bytes);
        }
    }
}
