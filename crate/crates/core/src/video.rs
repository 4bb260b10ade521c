//! Frame sequences as matrices.
//!
//! A video of `n` frames, each `rows x cols`, is held as an `m x n` matrix
//! with `m = rows * cols`. Frames are stacked column-major: pixel `(r, c)`
//! lands at index `r + c * rows`. Intensities are stored in `[0, 1]`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameGeometry {
    rows: usize,
    cols: usize,
}

impl FrameGeometry {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Geometry(format!(
                "frame must be at least 1x1, got {rows}x{cols}"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Pixels per frame.
    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }
}

/// Stack a frame into a column vector, column-major.
pub fn vectorize(frame: &DMatrix<f64>, geometry: FrameGeometry) -> Result<DVector<f64>> {
    if frame.shape() != (geometry.rows, geometry.cols) {
        return Err(mismatch("vectorize", (geometry.rows, geometry.cols), frame.shape()));
    }
    // nalgebra storage is already column-major
    Ok(DVector::from_column_slice(frame.as_slice()))
}

pub fn devectorize(column: &[f64], geometry: FrameGeometry) -> Result<DMatrix<f64>> {
    if column.len() != geometry.pixels() {
        return Err(mismatch("devectorize", (geometry.pixels(), 1), (column.len(), 1)));
    }
    Ok(DMatrix::from_column_slice(geometry.rows, geometry.cols, column))
}

/// `m x n` frame matrix with its frame geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoSequence {
    data: DMatrix<f64>,
    geometry: FrameGeometry,
}

impl VideoSequence {
    pub fn new(data: DMatrix<f64>, geometry: FrameGeometry) -> Result<Self> {
        if data.nrows() != geometry.pixels() {
            return Err(mismatch(
                "video sequence",
                (geometry.pixels(), data.ncols()),
                data.shape(),
            ));
        }
        if data.ncols() == 0 {
            return Err(Error::Empty("video sequence has no frames"));
        }
        if let Some(bad) = data.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Config(format!("pixel intensity {bad} outside [0, 1]")));
        }
        Ok(Self { data, geometry })
    }

    /// Build a sequence from 8-bit frames given in temporal order.
    pub fn from_u8_frames(frames: &[Vec<u8>], geometry: FrameGeometry) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::Empty("no frames"));
        }
        let m = geometry.pixels();
        let mut data = DMatrix::zeros(m, frames.len());
        for (j, frame) in frames.iter().enumerate() {
            if frame.len() != m {
                return Err(mismatch("frame", (m, 1), (frame.len(), 1)));
            }
            for (dst, &px) in data.column_mut(j).iter_mut().zip(frame) {
                *dst = f64::from(px) / 255.0;
            }
        }
        Self::new(data, geometry)
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn geometry(&self) -> FrameGeometry {
        self.geometry
    }

    pub fn pixels(&self) -> usize {
        self.data.nrows()
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    /// Frame `j` as a `rows x cols` image.
    pub fn frame(&self, j: usize) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.geometry.rows, self.geometry.cols, self.data.column(j).as_slice())
    }

    pub fn into_data(self) -> DMatrix<f64> {
        self.data
    }
}

/// Map integer intensities `0..=255` to `[0, 1]`.
pub fn normalize(raw: &DMatrix<i64>, geometry: FrameGeometry) -> Result<VideoSequence> {
    if let Some(&value) = raw.iter().find(|v| !(0..=255).contains(*v)) {
        return Err(Error::PixelOutOfRange { value });
    }
    VideoSequence::new(raw.map(|v| v as f64 / 255.0), geometry)
}

/// Inverse of [`normalize`] for a single intensity, clamped to 8 bits.
pub fn to_u8(value: f64) -> u8 {
    (value * 255.0).round().clamp(0.0, 255.0) as u8
}

/// Contiguous, ordered, disjoint column ranges covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchPartition {
    ranges: Vec<Range<usize>>,
}

impl BatchPartition {
    /// Split `n` frames into `p` batches; the first `n mod p` batches get one
    /// extra frame.
    pub fn new(n: usize, p: usize) -> Result<Self> {
        if p < 1 || p > n {
            return Err(Error::Config(format!(
                "batch count {p} must be between 1 and the frame count {n}"
            )));
        }
        let (base, extra) = (n / p, n % p);
        let mut start = 0;
        let ranges = (0..p)
            .map(|j| {
                let len = base + usize::from(j < extra);
                let range = start..start + len;
                start += len;
                range
            })
            .collect();
        Ok(Self { ranges })
    }

    /// Build from explicit sizes, for callers that want unequal batches.
    pub fn from_sizes(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config("batch sizes must be non-empty and positive".into()));
        }
        let mut start = 0;
        let ranges = sizes
            .iter()
            .map(|&len| {
                let range = start..start + len;
                start += len;
                range
            })
            .collect();
        Ok(Self { ranges })
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.ranges
    }

    pub fn len(&self) -> usize {
        self.ranges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranges.is_empty()
    }

    pub fn total(&self) -> usize {
        self.ranges.last().map_or(0, |r| r.end)
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.ranges.iter().map(|r| r.len()).collect()
    }
}

/// Convenience wrapper matching the usual call shape.
pub fn partition(n: usize, p: usize) -> Result<BatchPartition> {
    BatchPartition::new(n, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn vectorize_is_column_major() {
        let g = FrameGeometry::new(2, 2).unwrap();
        let f = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vectorize(&f, g).unwrap().as_slice(), &[1.0, 3.0, 2.0, 4.0]);
    }

    #[test]
    fn vectorize_zero_frame() {
        let g = FrameGeometry::new(3, 5).unwrap();
        let v = vectorize(&DMatrix::zeros(3, 5), g).unwrap();
        assert!(v.iter().all(|&x| x == 0.0));
        assert_eq!(v.len(), 15);
    }

    #[test]
    fn vectorize_rejects_wrong_shape() {
        let g = FrameGeometry::new(3, 4).unwrap();
        assert!(vectorize(&DMatrix::zeros(4, 3), g).is_err());
        assert!(devectorize(&[0.0; 11], g).is_err());
    }

    #[test]
    fn geometry_rejects_zero() {
        assert!(FrameGeometry::new(0, 4).is_err());
        assert!(FrameGeometry::new(4, 0).is_err());
    }

    #[test]
    fn partition_examples() {
        let p = partition(600, 6).unwrap();
        assert_eq!(p.sizes(), vec![100; 6]);
        assert_eq!(partition(7, 3).unwrap().sizes(), vec![3, 2, 2]);
        assert_eq!(partition(5, 1).unwrap().ranges(), std::slice::from_ref(&(0..5)));
        assert!(partition(5, 0).is_err());
        assert!(partition(5, 6).is_err());
    }

    #[test]
    fn normalize_examples() {
        let g = FrameGeometry::new(1, 3).unwrap();
        let raw = DMatrix::from_column_slice(3, 1, &[255, 0, 128]);
        let v = normalize(&raw, g).unwrap();
        assert_eq!(v.data()[0], 1.0);
        assert_eq!(v.data()[1], 0.0);
        assert_eq!(v.data()[2], 128.0 / 255.0);
        let bad = DMatrix::from_column_slice(3, 1, &[255, -1, 128]);
        assert!(matches!(normalize(&bad, g), Err(Error::PixelOutOfRange { value: -1 })));
        let bad = DMatrix::from_column_slice(3, 1, &[256, 0, 0]);
        assert!(normalize(&bad, g).is_err());
    }

    #[test]
    fn normalize_inverts_by_rounding() {
        for v in 0..=255u8 {
            assert_eq!(to_u8(f64::from(v) / 255.0), v);
        }
    }

    proptest! {
        #[test]
        fn partition_covers_range(n in 1usize..=1000, p_frac in 0.0f64..1.0) {
            let p = 1 + ((n - 1) as f64 * p_frac) as usize;
            let part = partition(n, p).unwrap();
            prop_assert_eq!(part.len(), p);
            prop_assert_eq!(part.sizes().iter().sum::<usize>(), n);
            let mut expected_start = 0;
            for r in part.ranges() {
                prop_assert_eq!(r.start, expected_start);
                prop_assert!(!r.is_empty());
                expected_start = r.end;
            }
            let sizes = part.sizes();
            prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1]));
            prop_assert!(sizes[0] - sizes[p - 1] <= 1);
        }

        #[test]
        fn vectorize_roundtrip(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
            let g = FrameGeometry::new(rows, cols).unwrap();
            let f = DMatrix::from_fn(rows, cols, |r, c| {
                ((seed ^ ((r * 31 + c * 17) as u64)).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11) as f64
            });
            let v = vectorize(&f, g).unwrap();
            prop_assert_eq!(devectorize(v.as_slice(), g).unwrap(), f);
        }

        #[test]
        fn normalize_preserves_order(a in 0i64..=255, b in 0i64..=255) {
            let g = FrameGeometry::new(1, 2).unwrap();
            let v = normalize(&DMatrix::from_column_slice(2, 1, &[a, b]), g).unwrap();
            prop_assert_eq!(a.cmp(&b), v.data()[0].partial_cmp(&v.data()[1]).unwrap());
        }
    }
}
