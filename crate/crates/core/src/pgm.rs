//! Binary PGM (P5) frame I/O.
//!
//! A directory of `.pgm` files is a video; lexicographic filename order is
//! temporal order.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::video::{to_u8, FrameGeometry, VideoSequence};

/// 8-bit grayscale image, pixels in row-major order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn geometry(&self) -> Result<FrameGeometry> {
        FrameGeometry::new(self.height, self.width)
    }

    /// Pixels stacked column-major, matching [`crate::video::vectorize`].
    pub fn to_column(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.pixels.len());
        for c in 0..self.width {
            for r in 0..self.height {
                out.push(self.pixels[r * self.width + c]);
            }
        }
        out
    }

    /// Build from a column-major vector of `[0, 1]` intensities.
    pub fn from_column(geometry: FrameGeometry, column: &[f64]) -> Self {
        let (h, w) = (geometry.rows(), geometry.cols());
        let mut pixels = vec![0u8; h * w];
        for c in 0..w {
            for r in 0..h {
                pixels[r * w + c] = to_u8(column[r + c * h]);
            }
        }
        Self {
            width: w,
            height: h,
            pixels,
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn decode(bytes: &[u8], path: &Path) -> Result<Self> {
        let bad = |reason: &str| Error::Pgm {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if bytes.len() < 2 || &bytes[..2] != b"P5" {
            return Err(bad("missing P5 magic"));
        }
        let mut pos = 2;
        let mut fields = [0usize; 3];
        for field in &mut fields {
            // whitespace and comments
            loop {
                match bytes.get(pos) {
                    Some(b) if b.is_ascii_whitespace() => pos += 1,
                    Some(b'#') => {
                        while bytes.get(pos).is_some_and(|&b| b != b'\n') {
                            pos += 1;
                        }
                    }
                    Some(_) => break,
                    None => return Err(bad("truncated header")),
                }
            }
            let start = pos;
            while bytes.get(pos).is_some_and(u8::is_ascii_digit) {
                pos += 1;
            }
            if start == pos {
                return Err(bad("expected a number in header"));
            }
            *field = std::str::from_utf8(&bytes[start..pos])
                .ok()
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("header number out of range"))?;
        }
        let [width, height, maxval] = fields;
        if width == 0 || height == 0 {
            return Err(bad("zero-sized image"));
        }
        if !(1..=255).contains(&maxval) {
            return Err(bad("only 8-bit PGM (maxval <= 255) is supported"));
        }
        if !bytes.get(pos).is_some_and(u8::is_ascii_whitespace) {
            return Err(bad("missing whitespace after header"));
        }
        pos += 1;
        let count = width * height;
        let data = bytes.get(pos..pos + count).ok_or_else(|| bad("truncated pixel data"))?;
        let pixels = if maxval == 255 {
            data.to_vec()
        } else {
            data.iter()
                .map(|&v| ((v.min(maxval as u8) as f64) * 255.0 / maxval as f64).round() as u8)
                .collect()
        };
        Ok(Self { width, height, pixels })
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    GrayImage::decode(&bytes, path)
}

pub fn write_pgm(path: &Path, image: &GrayImage) -> Result<()> {
    fs::write(path, image.encode()).map_err(io_err(path))
}

/// `.pgm` files in `dir`, sorted by file name.
pub fn list_frames(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e.eq_ignore_ascii_case("pgm")))
        .collect();
    paths.sort();
    Ok(paths)
}

/// All frames of a directory as raw 8-bit column vectors plus their geometry.
pub fn read_frames(dir: &Path) -> Result<(Vec<Vec<u8>>, FrameGeometry)> {
    let paths = list_frames(dir)?;
    let Some(first) = paths.first() else {
        return Err(Error::Geometry(format!("no .pgm frames in {}", dir.display())));
    };
    let first_image = read_pgm(first)?;
    let geometry = first_image.geometry()?;
    let mut frames = vec![first_image.to_column()];
    for path in &paths[1..] {
        let img = read_pgm(path)?;
        if (img.height, img.width) != (geometry.rows(), geometry.cols()) {
            return Err(Error::Geometry(format!(
                "{} is {}x{}, expected {}x{}",
                path.display(),
                img.height,
                img.width,
                geometry.rows(),
                geometry.cols()
            )));
        }
        frames.push(img.to_column());
    }
    Ok((frames, geometry))
}

pub fn read_sequence(dir: &Path) -> Result<VideoSequence> {
    let (frames, geometry) = read_frames(dir)?;
    VideoSequence::from_u8_frames(&frames, geometry)
}

/// Write every column of `data` as `frame_00000.pgm`, `frame_00001.pgm`, ...
pub fn write_sequence(dir: &Path, data: &DMatrix<f64>, geometry: FrameGeometry) -> Result<usize> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    for j in 0..data.ncols() {
        let img = GrayImage::from_column(geometry, data.column(j).as_slice());
        write_pgm(&dir.join(frame_name(j)), &img)?;
    }
    Ok(data.ncols())
}

pub fn frame_name(index: usize) -> String {
    format!("frame_{index:05}.pgm")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_roundtrip() {
        let img = GrayImage {
            width: 3,
            height: 2,
            pixels: vec![0, 10, 20, 30, 40, 255],
        };
        let bytes = img.encode();
        assert_eq!(&bytes[..11], b"P5\n3 2\n255\n");
        assert_eq!(GrayImage::decode(&bytes, Path::new("x")).unwrap(), img);
    }

    #[test]
    fn decode_with_comments_and_maxval() {
        let mut bytes = b"P5 # comment\n2 # w\n1\n15\n".to_vec();
        bytes.extend_from_slice(&[15, 0]);
        let img = GrayImage::decode(&bytes, Path::new("x")).unwrap();
        assert_eq!(img.pixels, vec![255, 0]);
    }

    #[test]
    fn decode_rejects_garbage() {
        let p = Path::new("x");
        assert!(GrayImage::decode(b"P2\n1 1\n255\n0", p).is_err());
        assert!(GrayImage::decode(b"P5\n2 2\n255\n\x00", p).is_err());
        assert!(GrayImage::decode(b"P5\n2 2\n65535\n", p).is_err());
        assert!(GrayImage::decode(b"P5\n2", p).is_err());
    }

    #[test]
    fn column_order() {
        let img = GrayImage {
            width: 2,
            height: 2,
            pixels: vec![1, 2, 3, 4],
        };
        assert_eq!(img.to_column(), vec![1, 3, 2, 4]);
        let g = img.geometry().unwrap();
        let col: Vec<f64> = img.to_column().iter().map(|&v| f64::from(v) / 255.0).collect();
        assert_eq!(GrayImage::from_column(g, &col), img);
    }
}
