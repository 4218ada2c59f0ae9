//! 8-bit grayscale frames and their PGM/PPM files.

use std::path::Path;

use image::{DynamicImage, ImageFormat};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    /// Row-major pixels, `width * height` of them.
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Validation("image dimensions must be positive".into()));
        }
        if data.len() != width * height {
            return Err(Error::LengthMismatch {
                what: "image pixels",
                expected: width * height,
                found: data.len(),
            });
        }
        Ok(GrayImage { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    /// Pixel at signed coordinates, or `None` outside the image.
    pub fn get_signed(&self, x: i64, y: i64) -> Option<u8> {
        if x < 0 || y < 0 || x >= self.width as i64 || y >= self.height as i64 {
            None
        } else {
            Some(self.get(x as usize, y as usize))
        }
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }
}

/// `0.299 R + 0.587 G + 0.114 B`, rounded.
pub fn luma(r: u8, g: u8, b: u8) -> u8 {
    (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64)
        .round()
        .clamp(0.0, 255.0) as u8
}

/// Read a binary PGM (P5) or PPM (P6) frame. Colour frames are luma-converted.
pub fn read_frame(path: &Path) -> Result<GrayImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let magic = bytes.get(..2).unwrap_or_default();
    if magic != b"P5" && magic != b"P6" {
        return Err(Error::Format {
            path: path.into(),
            offset: 0,
            msg: "expected binary PGM (P5) or PPM (P6)".into(),
        });
    }
    let img = image::load_from_memory_with_format(&bytes, ImageFormat::Pnm).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    let data = match img {
        DynamicImage::ImageLuma8(g) => g.into_raw(),
        DynamicImage::ImageRgb8(rgb) => rgb.pixels().map(|p| luma(p[0], p[1], p[2])).collect(),
        other => {
            return Err(Error::Format {
                path: path.into(),
                offset: 0,
                msg: format!("unsupported pixel layout {:?}, expected 8-bit", other.color()),
            })
        }
    };
    GrayImage::new(w, h, data)
}

/// Write a binary PGM (P5).
pub fn write_pgm(path: &Path, img: &GrayImage) -> Result<()> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.data);
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// File name of the frame at step `t` for one eye, e.g. `frame_left_000012.pgm`.
pub fn frame_file_name(eye: &str, t: usize, ext: &str) -> String {
    format!("frame_{eye}_{t:06}.{ext}")
}

/// Read `frame_{eye}_{t:06}.pgm` (or `.ppm`) for `t = 0..`, stopping at the
/// first missing index.
pub fn read_frame_dir(dir: &Path, eye: &str) -> Result<Vec<GrayImage>> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "frame directory not found"),
        ));
    }
    let mut frames = Vec::new();
    loop {
        let t = frames.len();
        let pgm = dir.join(frame_file_name(eye, t, "pgm"));
        let ppm = dir.join(frame_file_name(eye, t, "ppm"));
        let path = if pgm.exists() {
            pgm
        } else if ppm.exists() {
            ppm
        } else {
            break;
        };
        frames.push(read_frame(&path)?);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        let img = GrayImage::new(3, 2, vec![0, 10, 20, 30, 40, 255]).unwrap();
        write_pgm(&p, &img).unwrap();
        assert_eq!(read_frame(&p).unwrap(), img);
    }

    #[test]
    fn ppm_is_luma_converted() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.ppm");
        let mut bytes = b"P6\n# comment\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 10, 200, 30]);
        std::fs::write(&p, bytes).unwrap();
        let img = read_frame(&p).unwrap();
        assert_eq!(img.pixels(), &[76, 124]);
        assert_eq!(luma(255, 0, 0), 76);
        assert_eq!(
            luma(10, 200, 30),
            (0.299f64 * 10.0 + 0.587 * 200.0 + 0.114 * 30.0).round() as u8
        );
    }

    #[test]
    fn ascii_pnm_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        std::fs::write(&p, "P2\n1 1\n255\n7\n").unwrap();
        assert!(matches!(read_frame(&p), Err(Error::Format { offset: 0, .. })));
    }

    #[test]
    fn frame_dir_reads_in_order() {
        let dir = tempfile::tempdir().unwrap();
        for t in 0..3 {
            let img = GrayImage::filled(2, 2, t as u8).unwrap();
            write_pgm(&dir.path().join(frame_file_name("left", t, "pgm")), &img).unwrap();
        }
        let frames = read_frame_dir(dir.path(), "left").unwrap();
        assert_eq!(frames.len(), 3);
        assert_eq!(frames[2].get(1, 1), 2);
        assert!(read_frame_dir(dir.path(), "right").unwrap().is_empty());
    }
}
