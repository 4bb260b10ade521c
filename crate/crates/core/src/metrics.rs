//! Evaluation: SSIM maps, foreground cleanup and ROC / precision-recall
//! curves against binary ground truth.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::par;
use crate::video::FrameGeometry;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
/// Dynamic range of `[0, 1]` intensities.
const DYNAMIC_RANGE: f64 = 1.0;
const C1: f64 = (0.01 * DYNAMIC_RANGE) * (0.01 * DYNAMIC_RANGE);
const C2: f64 = (0.03 * DYNAMIC_RANGE) * (0.03 * DYNAMIC_RANGE);

/// Number of thresholds swept by [`curves`].
pub const CURVE_POINTS: usize = 100;

/// Normalised 1-D Gaussian taps; the 2-D window is their outer product.
pub fn gaussian_taps(size: usize, sigma: f64) -> Vec<f64> {
    let center = (size as f64 - 1.0) / 2.0;
    let raw: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - center;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

/// Half-sample symmetric boundary: `-1 -> 0`, `-2 -> 1`, `n -> n-1`.
fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let j = i.rem_euclid(period);
    if j < n as isize {
        j as usize
    } else {
        (period - 1 - j) as usize
    }
}

fn blur(img: &DMatrix<f64>, taps: &[f64]) -> DMatrix<f64> {
    let (rows, cols) = img.shape();
    let half = (taps.len() / 2) as isize;
    let mut tmp = DMatrix::<f64>::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            tmp[(r, c)] = taps
                .iter()
                .enumerate()
                .map(|(t, w)| w * img[(reflect(r as isize + t as isize - half, rows), c)])
                .sum();
        }
    }
    let mut out = DMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            out[(r, c)] = taps
                .iter()
                .enumerate()
                .map(|(t, w)| w * tmp[(r, reflect(c as isize + t as isize - half, cols))])
                .sum();
        }
    }
    out
}

/// Per-pixel SSIM, same geometry as the inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct SsimMap {
    pub values: DMatrix<f64>,
}

impl SsimMap {
    pub fn mean(&self) -> f64 {
        self.values.mean()
    }
}

/// SSIM with an 11x11 Gaussian window (sigma 1.5), `K1 = 0.01`, `K2 = 0.03`
/// and `L = 1`, symmetric padding at the borders.
pub fn ssim_map(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<SsimMap> {
    if x.shape() != y.shape() {
        return Err(mismatch("ssim_map", x.shape(), y.shape()));
    }
    if x.is_empty() {
        return Err(Error::Empty("ssim frame"));
    }
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let mu_x = blur(x, &taps);
    let mu_y = blur(y, &taps);
    let xx = blur(&x.component_mul(x), &taps);
    let yy = blur(&y.component_mul(y), &taps);
    let xy = blur(&x.component_mul(y), &taps);
    let values = DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| {
        let (mx, my) = (mu_x[(r, c)], mu_y[(r, c)]);
        let var_x = xx[(r, c)] - mx * mx;
        let var_y = yy[(r, c)] - my * my;
        let cov = xy[(r, c)] - mx * my;
        ((2.0 * mx * my + C1) * (2.0 * cov + C2)) / ((mx * mx + my * my + C1) * (var_x + var_y + C2))
    });
    Ok(SsimMap { values })
}

/// Mean SSIM between two frames.
pub fn mssim(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<f64> {
    Ok(ssim_map(x, y)?.mean())
}

/// MSSIM for every frame of two `m x n` frame matrices.
pub fn mssim_per_frame(x: &DMatrix<f64>, y: &DMatrix<f64>, geometry: FrameGeometry) -> Result<Vec<f64>> {
    if x.shape() != y.shape() {
        return Err(mismatch("mssim_per_frame", x.shape(), y.shape()));
    }
    if x.nrows() != geometry.pixels() {
        return Err(mismatch("mssim_per_frame", (geometry.pixels(), x.ncols()), x.shape()));
    }
    let frame = |m: &DMatrix<f64>, j: usize| {
        DMatrix::from_column_slice(geometry.rows(), geometry.cols(), m.column(j).as_slice())
    };
    par::map_range(x.ncols(), |j| mssim(&frame(x, j), &frame(y, j)))
        .into_iter()
        .collect()
}

/// Zero every entry with `|F| < eps1`.
pub fn clean_foreground(foreground: &DMatrix<f64>, eps1: f64) -> DMatrix<f64> {
    foreground.map(|v| if v.abs() < eps1 { 0.0 } else { v })
}

/// Binary support of a (cleaned) foreground.
pub fn support(foreground: &DMatrix<f64>) -> DMatrix<bool> {
    foreground.map(|v| v != 0.0)
}

/// Intersection over union of two masks; two empty masks give 1.
pub fn iou<'a>(pred: impl IntoIterator<Item = &'a bool>, truth: impl IntoIterator<Item = &'a bool>) -> f64 {
    let (mut inter, mut union) = (0usize, 0usize);
    for (&p, &t) in pred.into_iter().zip(truth) {
        inter += usize::from(p && t);
        union += usize::from(p || t);
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub threshold: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub precision: f64,
    pub recall: f64,
}

/// Threshold-indexed ROC / precision-recall points, thresholds increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCurve {
    pub points: Vec<CurvePoint>,
}

impl MetricCurve {
    /// Trapezoidal area under the ROC curve, closed with `(0,0)` and `(1,1)`.
    pub fn auc(&self) -> f64 {
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.points.len() + 2);
        pts.push((0.0, 0.0));
        pts.extend(self.points.iter().rev().map(|p| (p.fpr, p.tpr)));
        pts.push((1.0, 1.0));
        pts.windows(2)
            .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
            .sum()
    }

    /// CSV with header `threshold,tpr,fpr,precision,recall`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,tpr,fpr,precision,recall\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                sig6(p.threshold),
                sig6(p.tpr),
                sig6(p.fpr),
                sig6(p.precision),
                sig6(p.recall)
            );
        }
        out
    }
}

/// `%g`-style formatting with six significant digits.
pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x == 0.0 { "0".into() } else { format!("{x}") };
    }
    let exp = x.abs().log10().floor() as i32;
    if !(-4..6).contains(&exp) {
        let s = format!("{:.5e}", x);
        let (mantissa, e) = s.split_once('e').expect("exponent");
        let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
        let e: i32 = e.parse().expect("exponent");
        return format!("{mantissa}e{}{:02}", if e < 0 { '-' } else { '+' }, e.abs());
    }
    let decimals = (5 - exp).max(0) as usize;
    let s = format!("{:.*}", decimals, x);
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Thresholds `linspace(0, 255, count)`.
pub fn thresholds(count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![0.0];
    }
    (0..count).map(|i| 255.0 * i as f64 / (count - 1) as f64).collect()
}

/// Pixel-wise ROC and precision-recall points over all frames.
///
/// A pixel is predicted foreground at threshold `t` when `255 * |F| >= t`.
/// `foreground` and `truth` are `m x n` with one column per frame.
pub fn curves(foreground: &DMatrix<f64>, truth: &DMatrix<bool>) -> Result<MetricCurve> {
    curves_with(foreground, truth, CURVE_POINTS)
}

/// [`curves`] with a custom number of uniformly spaced thresholds.
pub fn curves_with(foreground: &DMatrix<f64>, truth: &DMatrix<bool>, count: usize) -> Result<MetricCurve> {
    if count == 0 {
        return Err(Error::Config("at least one threshold is required".into()));
    }
    if foreground.shape() != truth.shape() {
        return Err(mismatch("curves", truth.shape(), foreground.shape()));
    }
    if foreground.is_empty() {
        return Err(Error::Empty("curve input"));
    }
    let ts = thresholds(count);
    // per frame: counts of pixels whose score passes exactly the first `c` thresholds
    let histograms = par::map_range(foreground.ncols(), |j| {
        let mut pos = vec![0u64; count + 1];
        let mut neg = vec![0u64; count + 1];
        for (f, &t) in foreground.column(j).iter().zip(truth.column(j).iter()) {
            let score = f.abs() * 255.0;
            let passed = ts.partition_point(|&th| th <= score);
            if t {
                pos[passed] += 1;
            } else {
                neg[passed] += 1;
            }
        }
        (pos, neg)
    });
    let mut pos = vec![0u64; count + 1];
    let mut neg = vec![0u64; count + 1];
    for (p, n) in histograms {
        for i in 0..=count {
            pos[i] += p[i];
            neg[i] += n[i];
        }
    }
    let total_pos: u64 = pos.iter().sum();
    let total_neg: u64 = neg.iter().sum();
    let ratio = |a: u64, b: u64, empty: f64| if b == 0 { empty } else { a as f64 / b as f64 };

    // threshold i is passed by every pixel with passed-count > i
    let mut tp: u64 = total_pos - pos[0];
    let mut fp: u64 = total_neg - neg[0];
    let mut points = Vec::with_capacity(count);
    for (i, &threshold) in ts.iter().enumerate() {
        if i > 0 {
            tp -= pos[i];
            fp -= neg[i];
        }
        let tpr = ratio(tp, total_pos, 0.0);
        points.push(CurvePoint {
            threshold,
            tpr,
            fpr: ratio(fp, total_neg, 0.0),
            precision: ratio(tp, tp + fp, 1.0),
            recall: tpr,
        });
    }
    Ok(MetricCurve { points })
}
