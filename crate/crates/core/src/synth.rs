//! Synthetic sequences with exact ground truth.
//!
//! The background is a sum of `bg_rank` separable terms, each a smooth
//! spatial pattern times a smooth temporal profile, so its rank is exactly
//! `bg_rank`. A rectangular object of constant amplitude is added along a
//! per-frame trajectory, then Gaussian noise, then the result is clipped to
//! `[0, 1]`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video::{FrameGeometry, VideoSequence};

pub mod oracle;

/// Top-left `(row, col)` of the object per frame; `None` when absent.
pub type Trajectory = Vec<Option<(usize, usize)>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub geometry: FrameGeometry,
    pub n_frames: usize,
    pub bg_rank: usize,
    /// Object height and width in pixels.
    pub object_size: (usize, usize),
    pub trajectory: Trajectory,
    pub fg_amplitude: f64,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    /// 64x64, 60 frames, rank-2 background, 12x12 object.
    fn default() -> Self {
        let geometry = FrameGeometry::new(64, 64).expect("static geometry");
        let object_size = (12, 12);
        let n_frames = 60;
        Self {
            geometry,
            n_frames,
            bg_rank: 2,
            object_size,
            trajectory: passes(geometry, object_size, n_frames, 10, 10),
            fg_amplitude: 0.5,
            noise_sigma: 0.01,
            seed: 7,
        }
    }
}

/// The object crosses the frame left to right in `visible` frames, then is
/// absent for `gap` frames; every pass uses a different row.
pub fn passes(
    geometry: FrameGeometry,
    object_size: (usize, usize),
    n_frames: usize,
    visible: usize,
    gap: usize,
) -> Trajectory {
    let (h, w) = object_size;
    let max_row = geometry.rows().saturating_sub(h);
    let max_col = geometry.cols().saturating_sub(w);
    let lap = (visible + gap).max(1);
    let rows = [0.55, 0.2, 0.75, 0.35, 0.05, 0.9];
    (0..n_frames)
        .map(|t| {
            let (pass, phase) = (t / lap, t % lap);
            if phase >= visible {
                return None;
            }
            let row = (rows[pass % rows.len()] * max_row as f64).round() as usize;
            let col = if visible > 1 {
                (phase as f64 * max_col as f64 / (visible - 1) as f64).round() as usize
            } else {
                max_col / 2
            };
            Some((row, col))
        })
        .collect()
}

impl SynthSpec {
    /// Hold the object still for the last `n` frames, at its last position
    /// before that segment (or centred if it was never visible).
    pub fn with_static_tail(mut self, n: usize) -> Self {
        let n = n.min(self.n_frames);
        let split = self.n_frames - n;
        let (h, w) = self.object_size;
        let centre = (
            self.geometry.rows().saturating_sub(h) / 2,
            self.geometry.cols().saturating_sub(w) / 2,
        );
        let parked = self.trajectory[..split].iter().rev().find_map(|p| *p).unwrap_or(centre);
        for slot in &mut self.trajectory[split..] {
            *slot = Some(parked);
        }
        self
    }

    /// Same spec with a different frame count and a fresh default trajectory.
    pub fn with_frames(mut self, n_frames: usize) -> Self {
        self.n_frames = n_frames;
        self.trajectory = passes(self.geometry, self.object_size, n_frames, 10, 10);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_frames == 0 {
            return Err(Error::Config("synthetic sequence needs at least one frame".into()));
        }
        if self.bg_rank < 1 {
            return Err(Error::Config("background rank must be at least 1".into()));
        }
        if self.trajectory.len() != self.n_frames {
            return Err(Error::Config(format!(
                "trajectory has {} entries for {} frames",
                self.trajectory.len(),
                self.n_frames
            )));
        }
        let (h, w) = self.object_size;
        for (t, pos) in self.trajectory.iter().enumerate() {
            if let Some((r, c)) = pos {
                if r + h > self.geometry.rows() || c + w > self.geometry.cols() {
                    return Err(Error::Config(format!("object leaves the frame at frame {t}")));
                }
            }
        }
        if !(self.noise_sigma >= 0.0 && self.noise_sigma.is_finite()) {
            return Err(Error::Config("noise sigma must be finite and non-negative".into()));
        }
        if !self.fg_amplitude.is_finite() {
            return Err(Error::Config("foreground amplitude must be finite".into()));
        }
        Ok(())
    }
}

/// Generated sequence and its ground truth, all `m x n`.
#[derive(Debug, Clone)]
pub struct SyntheticVideo {
    pub video: VideoSequence,
    pub background: DMatrix<f64>,
    pub foreground: DMatrix<f64>,
    pub masks: DMatrix<bool>,
}

pub fn generate(spec: &SynthSpec) -> Result<SyntheticVideo> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (rows, cols) = (spec.geometry.rows(), spec.geometry.cols());
    let (m, n) = (spec.geometry.pixels(), spec.n_frames);

    let mut background = DMatrix::zeros(m, n);
    for l in 0..spec.bg_rank {
        let (phi_r, phi_c, psi) = (
            rng.random_range(0.0..PI),
            rng.random_range(0.0..PI),
            rng.random_range(0.0..2.0 * PI),
        );
        let lf = l as f64;
        let spatial = DMatrix::from_fn(rows, cols, |r, c| {
            let (y, x) = (r as f64 / rows as f64, c as f64 / cols as f64);
            // two cycles across the frame: enough local contrast that SSIM
            // is not dominated by sensor noise, still low-frequency
            if l == 0 {
                0.28 + 0.15 * (4.0 * PI * y + phi_r).cos() * (4.0 * PI * x + phi_c).cos()
            } else {
                0.04 * (2.0 * (lf + 1.0) * PI * y + phi_r).cos() * (2.0 * lf * PI * x + phi_c).cos()
            }
        });
        let temporal: Vec<f64> = (0..n)
            .map(|t| {
                let s = t as f64 / n as f64;
                if l == 0 {
                    1.0 + 0.05 * (2.0 * PI * s + psi).sin()
                } else {
                    (2.0 * PI * lf * s + psi).sin()
                }
            })
            .collect();
        for (t, &tv) in temporal.iter().enumerate() {
            for (dst, &sv) in background.column_mut(t).iter_mut().zip(spatial.as_slice()) {
                *dst += sv * tv;
            }
        }
    }

    let (h, w) = spec.object_size;
    let mut foreground = DMatrix::zeros(m, n);
    let mut masks = DMatrix::from_element(m, n, false);
    for (t, pos) in spec.trajectory.iter().enumerate() {
        if let Some((r0, c0)) = *pos {
            for c in c0..c0 + w {
                for r in r0..r0 + h {
                    foreground[(r + c * rows, t)] = spec.fg_amplitude;
                    masks[(r + c * rows, t)] = true;
                }
            }
        }
    }

    let mut data = &background + &foreground;
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma).map_err(|e| Error::Config(e.to_string()))?;
        for v in data.iter_mut() {
            *v += normal.sample(&mut rng);
        }
    }
    data.apply(|v| *v = v.clamp(0.0, 1.0));

    Ok(SyntheticVideo {
        video: VideoSequence::new(data, spec.geometry)?,
        background,
        foreground,
        masks,
    })
}
