//! Batch-incremental background estimation.
//!
//! The video is cut into `p` consecutive batches. The first batch gets a
//! coarse background/foreground split from one singular value
//! soft-thresholding. Then, for each batch `j`:
//!
//! 1. score the frames of the previous batch by foreground activity and
//!    keep the `k <= k_max` quietest as the prior block (for `j = 1` the
//!    "previous batch" is the first batch itself with its coarse split);
//! 2. prepend those frames to batch `j`, weight them with entries drawn
//!    uniformly from `[alpha, beta]`, and solve the weighted low-rank
//!    problem with rank `r = k + i_r`;
//! 3. keep the trailing columns of the low-rank part as the background of
//!    batch `j`; the foreground is the difference.
//!
//! The prior block never has more than `k_max` columns, so every solve is
//! at most `batch width + k_max` wide however long the video is.

use std::ops::Range;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lowrank::{svt, Rank, SvdFactors};
use crate::ops::OpCounter;
use crate::selector::{epsilon1, select_background_frames, SelectionConfig};
use crate::video::{BatchPartition, VideoSequence};
use crate::wlr::{self, WeightMatrix, WlrConfig};

/// Where the prior frames for batch `j` are read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriorSource {
    /// The raw frames of the previous batch.
    #[default]
    RawFrames,
    /// The background estimate of the previous batch.
    Background,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Number of batches `p`.
    pub batches: usize,
    /// SVT threshold as a fraction of the first batch's top singular value.
    pub tau_rel: f64,
    pub alpha: f64,
    pub beta: f64,
    pub selection: SelectionConfig,
    pub wlr: WlrConfig,
    pub seed: u64,
    pub prior_source: PriorSource,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            batches: 3,
            tau_rel: 0.05,
            alpha: 10.0,
            beta: 100.0,
            selection: SelectionConfig::default(),
            wlr: WlrConfig::default(),
            seed: 0,
            prior_source: PriorSource::RawFrames,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batches < 1 {
            return Err(Error::Config("batch count must be at least 1".into()));
        }
        if !(self.tau_rel > 0.0 && self.tau_rel < 1.0) {
            return Err(Error::Config(format!(
                "tau_rel must lie in (0, 1), got {}",
                self.tau_rel
            )));
        }
        if !(self.alpha > 0.0 && self.alpha <= self.beta && self.beta.is_finite()) {
            return Err(Error::Config(format!(
                "weight interval must satisfy 0 < alpha <= beta, got [{}, {}]",
                self.alpha, self.beta
            )));
        }
        self.selection.validate()?;
        self.wlr.validate()
    }
}

/// Coarse split of the first batch.
#[derive(Debug, Clone)]
pub struct InitialSplit {
    pub background: DMatrix<f64>,
    pub foreground: DMatrix<f64>,
    /// Set when the batch was a single frame or constant; the background is
    /// then the batch itself.
    pub degenerate: bool,
}

/// `B = svt(A, tau_rel * sigma_1(A))`, `F = A - B`.
pub fn initialize(batch: &DMatrix<f64>, tau_rel: f64) -> Result<InitialSplit> {
    if batch.is_empty() {
        return Err(Error::Empty("first batch"));
    }
    let min = batch.min();
    let max = batch.max();
    if batch.ncols() == 1 || min == max {
        return Ok(InitialSplit {
            background: batch.clone(),
            foreground: DMatrix::zeros(batch.nrows(), batch.ncols()),
            degenerate: true,
        });
    }
    let sigma1 = SvdFactors::compute(batch)?.singular_values[0];
    let background = svt(batch, tau_rel * sigma1)?;
    let foreground = batch - &background;
    Ok(InitialSplit {
        background,
        foreground,
        degenerate: false,
    })
}

/// `W1` with i.i.d. uniform entries on `[alpha, beta]`.
pub fn build_weights(m: usize, k: usize, alpha: f64, beta: f64, rng: &mut ChaCha8Rng) -> Result<WeightMatrix> {
    WeightMatrix::uniform(m, k, alpha, beta, rng)
}

#[derive(Debug, Clone)]
pub struct BatchResult {
    /// Batch number, starting at 0.
    pub index: usize,
    /// Global frame columns covered by this batch.
    pub columns: Range<usize>,
    pub background: DMatrix<f64>,
    pub foreground: DMatrix<f64>,
    /// Positions of the prior frames within the previous batch.
    pub prior_indices: Vec<usize>,
    pub k_used: Rank,
    pub r_used: Rank,
    /// Threshold that selected the prior frames of this batch.
    pub selection_eps1: f64,
    /// Noise floor of this batch's own foreground, used for cleanup.
    pub eps1: f64,
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub flops: u64,
    pub elapsed: Duration,
}

/// Solve one batch against its prior block and split it into background and
/// foreground.
pub fn run_batch(
    prior: &DMatrix<f64>,
    batch: &DMatrix<f64>,
    weights: &WeightMatrix,
    r: Rank,
    config: &WlrConfig,
) -> Result<BatchResult> {
    let start = Instant::now();
    let k = prior.ncols();
    let n_batch = batch.ncols();
    let solved = wlr::solve(prior, batch, weights, r, config)?;
    let background = solved.low_rank.columns(k, n_batch).into_owned();
    let foreground = batch - &background;
    Ok(BatchResult {
        index: 0,
        columns: 0..n_batch,
        background,
        foreground,
        prior_indices: Vec::new(),
        k_used: Rank(k),
        r_used: r,
        selection_eps1: 0.0,
        eps1: 0.0,
        objective_trace: solved.objective_trace,
        iterations: solved.iterations,
        converged: solved.converged,
        flops: solved.flops,
        elapsed: start.elapsed(),
    })
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub batches: Vec<BatchResult>,
    /// `(B^(1), ..., B^(p))`, one column per input frame.
    pub background_full: DMatrix<f64>,
    pub foreground_full: DMatrix<f64>,
    pub initial_degenerate: bool,
    /// Model flop count for the whole run.
    pub flops: u64,
    pub elapsed: Duration,
}

impl PipelineResult {
    /// Foreground with entries below each batch's `eps1` zeroed.
    pub fn cleaned_foreground(&self) -> DMatrix<f64> {
        let mut out = self.foreground_full.clone();
        for b in &self.batches {
            let cols = b.columns.clone();
            let cleaned = crate::metrics::clean_foreground(&b.foreground, b.eps1);
            out.columns_mut(cols.start, cols.len()).copy_from(&cleaned);
        }
        out
    }

    /// Widest weighted problem solved, in columns.
    pub fn max_problem_width(&self) -> usize {
        self.batches
            .iter()
            .map(|b| b.k_used.0 + b.columns.len())
            .max()
            .unwrap_or(0)
    }
}

/// Run the whole batch-incremental estimation with equal-size batches.
pub fn run(video: &VideoSequence, config: &PipelineConfig) -> Result<PipelineResult> {
    config.validate()?;
    let partition = BatchPartition::new(video.frames(), config.batches)?;
    run_partitioned(video, &partition, config)
}

/// As [`run`], with an explicit (possibly unequal) partition.
pub fn run_partitioned(
    video: &VideoSequence,
    partition: &BatchPartition,
    config: &PipelineConfig,
) -> Result<PipelineResult> {
    config.validate()?;
    if partition.total() != video.frames() {
        return Err(Error::Config(format!(
            "partition covers {} frames, video has {}",
            partition.total(),
            video.frames()
        )));
    }
    let start = Instant::now();
    let ops = OpCounter::new();
    let a = video.data();
    let m = a.nrows();
    let ranges = partition.ranges();

    let first = a.columns(ranges[0].start, ranges[0].len()).into_owned();
    let split = initialize(&first, config.tau_rel)?;
    if !split.degenerate {
        ops.svd(m, first.ncols());
        ops.svd(m, first.ncols());
        ops.elementwise(m, first.ncols());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut prev_batch = first;
    let mut background = split.background;
    let mut batches = Vec::with_capacity(ranges.len());
    let mut background_full = DMatrix::zeros(m, a.ncols());
    let mut foreground_full = DMatrix::zeros(m, a.ncols());

    for (j, range) in ranges.iter().enumerate() {
        let wrap = |e: Error| Error::Batch {
            index: j,
            source: Box::new(e),
        };
        let current = a.columns(range.start, range.len()).into_owned();

        let residual = &prev_batch - &background;
        let (selection_eps1, _, chosen) = select_background_frames(&residual, &config.selection).map_err(wrap)?;
        ops.add(4 * (m * residual.ncols()) as u64);

        let k = chosen.len();
        let r = Rank(k + config.selection.i_r);
        let source = match config.prior_source {
            PriorSource::RawFrames => &prev_batch,
            PriorSource::Background => &background,
        };
        let prior = source.select_columns(chosen.iter());
        let weights = build_weights(m, k, config.alpha, config.beta, &mut rng).map_err(wrap)?;

        let mut result = run_batch(&prior, &current, &weights, r, &config.wlr).map_err(wrap)?;
        result.index = j;
        result.columns = range.clone();
        result.prior_indices = chosen;
        result.selection_eps1 = selection_eps1;
        result.eps1 = epsilon1(&result.foreground, config.selection.sigma_mult).map_err(wrap)?;
        ops.add(result.flops);
        ops.add(4 * (m * range.len()) as u64);

        background_full
            .columns_mut(range.start, range.len())
            .copy_from(&result.background);
        foreground_full
            .columns_mut(range.start, range.len())
            .copy_from(&result.foreground);

        background = result.background.clone();
        prev_batch = current;
        batches.push(result);
    }

    Ok(PipelineResult {
        batches,
        background_full,
        foreground_full,
        initial_degenerate: split.degenerate,
        flops: ops.get(),
        elapsed: start.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::video::FrameGeometry;
    use rand::Rng;

    #[test]
    fn initialize_rank_one() {
        let u = DMatrix::from_fn(12, 1, |i, _| 0.2 + 0.05 * i as f64);
        let v = DMatrix::from_fn(1, 6, |_, j| 1.0 + 0.1 * j as f64);
        let a = &u * &v;
        let split = initialize(&a, 0.1).unwrap();
        // one direction, shrunk by tau = 0.1 sigma_1
        assert!((&split.background - &a * 0.9).amax() < 1e-12);
        assert!((&split.background + &split.foreground - &a).amax() < 1e-15);
    }

    #[test]
    fn initialize_zero_and_degenerate() {
        let split = initialize(&DMatrix::zeros(8, 4), 0.05).unwrap();
        assert!(split.degenerate);
        assert_eq!(split.background, DMatrix::zeros(8, 4));
        assert_eq!(split.foreground, DMatrix::zeros(8, 4));
        let single = DMatrix::from_element(8, 1, 0.3);
        assert!(initialize(&single, 0.05).unwrap().degenerate);
    }

    #[test]
    fn initialize_static_batch_low_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let frame: Vec<f64> = (0..400).map(|i| 0.3 + 0.2 * ((i % 20) as f64 / 20.0)).collect();
        let a = DMatrix::from_fn(400, 20, |i, _| frame[i] + 0.005 * (rng.random::<f64>() - 0.5));
        let split = initialize(&a, 0.05).unwrap();
        let rank = SvdFactors::compute(&split.background).unwrap().numerical_rank(1e-10);
        assert!(rank <= 3, "rank {rank}");
    }

    #[test]
    fn weights_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w = build_weights(5, 3, 4.0, 4.0, &mut rng).unwrap();
        assert!(w.w1().iter().all(|&v| v == 4.0));

        let a = build_weights(6, 2, 10.0, 100.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = build_weights(6, 2, 10.0, 100.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);

        let w = build_weights(100, 100, 10.0, 100.0, &mut rng).unwrap();
        let mean = w.w1().mean();
        // uniform on [10, 100]: sd 90 / sqrt(12), standard error over 1e4 samples
        let se = 90.0 / 12f64.sqrt() / 100.0;
        assert!((mean - 55.0).abs() < 3.0 * se, "mean {mean}");
        assert!(w.w1().iter().all(|v| (10.0..=100.0).contains(v)));
        assert!(build_weights(2, 2, 0.0, 1.0, &mut rng).is_err());
    }

    #[test]
    fn run_batch_pure_background() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let basis = DMatrix::from_fn(300, 2, |_, _| rng.random::<f64>());
        let prior = &basis * DMatrix::from_fn(2, 4, |_, _| rng.random::<f64>());
        let batch = &basis * DMatrix::from_fn(2, 8, |_, _| rng.random::<f64>());
        let w = WeightMatrix::constant(300, 4, 50.0).unwrap();
        let res = run_batch(&prior, &batch, &w, Rank(4), &WlrConfig::default()).unwrap();
        assert!(res.foreground.norm() / batch.norm() <= 1e-3);
    }

    #[test]
    fn run_batch_in_span_with_zero_headroom() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let prior = DMatrix::from_fn(50, 3, |_, _| rng.random::<f64>());
        let batch = &prior * DMatrix::from_fn(3, 6, |_, _| rng.random::<f64>());
        let w = WeightMatrix::constant(50, 3, 20.0).unwrap();
        let res = run_batch(&prior, &batch, &w, Rank(3), &WlrConfig::default()).unwrap();
        assert!(res.foreground.amax() < 1e-8);
    }

    #[test]
    fn config_validation() {
        let bad = [
            PipelineConfig {
                batches: 0,
                ..Default::default()
            },
            PipelineConfig {
                tau_rel: 0.0,
                ..Default::default()
            },
            PipelineConfig {
                tau_rel: 1.0,
                ..Default::default()
            },
            PipelineConfig {
                alpha: 5.0,
                beta: 1.0,
                ..Default::default()
            },
            PipelineConfig {
                alpha: 0.0,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
        let g = FrameGeometry::new(2, 2).unwrap();
        let v = VideoSequence::new(DMatrix::from_element(4, 2, 0.5), g).unwrap();
        assert!(run(
            &v,
            &PipelineConfig {
                batches: 3,
                ..Default::default()
            }
        )
        .is_err());
    }
}
