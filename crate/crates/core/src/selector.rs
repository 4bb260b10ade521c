//! Picking the frames of a batch that look most like pure background.
//!
//! A frame's score is the fraction of its pixels whose foreground magnitude
//! exceeds the adaptive noise floor `eps1 = mean(|F|) + sigma_mult * std(|F|)`.
//! The same `eps1` is reused to clean up recovered foregrounds.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Upper bound on the number of prior frames.
    pub k_max: usize,
    /// Rank headroom on top of the prior block: `r = k + i_r`.
    pub i_r: usize,
    /// Multiplier on the standard deviation in `eps1`.
    pub sigma_mult: f64,
}

impl Default for SelectionConfig {
    /// `k_max = 3`, `i_r = 0`: a few prior frames and no free rank. Extra
    /// rank or many near-duplicate prior frames give the solver room to
    /// absorb stationary objects into the background.
    fn default() -> Self {
        Self {
            k_max: 3,
            i_r: 0,
            sigma_mult: 2.0,
        }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_max < 1 {
            return Err(Error::Config("k_max must be at least 1".into()));
        }
        if !(self.sigma_mult.is_finite() && self.sigma_mult >= 0.0) {
            return Err(Error::Config(format!(
                "sigma_mult must be finite and non-negative, got {}",
                self.sigma_mult
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameScore {
    pub index: usize,
    /// Fraction of pixels above `eps1`, in `[0, 1]`.
    pub score: f64,
}

/// `mean(|F|) + sigma_mult * std(|F|)` over all entries (population std).
pub fn epsilon1(foreground: &DMatrix<f64>, sigma_mult: f64) -> Result<f64> {
    let count = foreground.len();
    if count == 0 {
        return Err(Error::Empty("foreground matrix"));
    }
    if foreground.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("foreground"));
    }
    let n = count as f64;
    let mean = foreground.iter().map(|v| v.abs()).sum::<f64>() / n;
    let var = foreground
        .iter()
        .map(|v| {
            let d = v.abs() - mean;
            d * d
        })
        .sum::<f64>()
        / n;
    Ok(mean + sigma_mult * var.sqrt())
}

/// Per-column fraction of entries with `|F| > eps1`.
pub fn score_frames(foreground: &DMatrix<f64>, eps1: f64) -> Vec<FrameScore> {
    let m = foreground.nrows().max(1) as f64;
    par::map_range(foreground.ncols(), |j| {
        let active = foreground.column(j).iter().filter(|v| v.abs() > eps1).count();
        FrameScore {
            index: j,
            score: active as f64 / m,
        }
    })
}

/// Indices of the `min(k_max, len)` lowest scores, ties broken by lower
/// index, returned in ascending order.
pub fn select(scores: &[FrameScore], k_max: usize) -> Vec<usize> {
    let mut order: Vec<&FrameScore> = scores.iter().collect();
    order.sort_by(|a, b| a.score.total_cmp(&b.score).then(a.index.cmp(&b.index)));
    let mut chosen: Vec<usize> = order.iter().take(k_max).map(|s| s.index).collect();
    chosen.sort_unstable();
    chosen
}

/// Score and select in one go; returns `(eps1, scores, indices)`.
pub fn select_background_frames(
    foreground: &DMatrix<f64>,
    config: &SelectionConfig,
) -> Result<(f64, Vec<FrameScore>, Vec<usize>)> {
    let eps1 = epsilon1(foreground, config.sigma_mult)?;
    let scores = score_frames(foreground, eps1);
    let chosen = select(&scores, config.k_max);
    Ok((eps1, scores, chosen))
}
