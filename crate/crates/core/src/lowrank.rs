//! Low-rank primitives: truncated SVD (hard thresholding), singular value
//! soft-thresholding, column-space projections and the closed-form solution
//! of the column-preserving constrained low-rank problem.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::linalg::thin_svd;

/// Relative tolerance on `sigma_k / sigma_1` below which a prior block is
/// treated as rank deficient.
pub const PRIOR_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Rank(pub usize);

impl Rank {
    pub fn get(self) -> usize {
        self.0
    }
}

impl From<usize> for Rank {
    fn from(r: usize) -> Self {
        Rank(r)
    }
}

/// Thin SVD `A = P diag(d) Q^T`, `d` non-ascending.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    pub left: DMatrix<f64>,
    pub singular_values: DVector<f64>,
    pub right: DMatrix<f64>,
}

impl SvdFactors {
    pub fn compute(a: &DMatrix<f64>) -> Result<Self> {
        let (left, sigma, right) = thin_svd(a)?;
        Ok(Self {
            left,
            singular_values: DVector::from_vec(sigma),
            right,
        })
    }

    pub fn len(&self) -> usize {
        self.singular_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.singular_values.is_empty()
    }

    /// `P diag(f(d)) Q^T`, skipping terms mapped to zero.
    pub fn rebuild_with(&self, f: impl Fn(usize, f64) -> f64) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.left.nrows(), self.right.nrows());
        for (i, &s) in self.singular_values.iter().enumerate() {
            let w = f(i, s);
            if w != 0.0 {
                out.ger(w, &self.left.column(i), &self.right.column(i), 1.0);
            }
        }
        out
    }

    /// Number of singular values above `rel_tol * sigma_1`.
    pub fn numerical_rank(&self, rel_tol: f64) -> usize {
        let s1 = self.singular_values.iter().copied().next().unwrap_or(0.0);
        if s1 == 0.0 {
            return 0;
        }
        self.singular_values.iter().filter(|&&s| s > rel_tol * s1).count()
    }
}

/// Best rank-`r` approximation in Frobenius norm (`H_r`).
pub fn hard_threshold(a: &DMatrix<f64>, r: Rank) -> Result<DMatrix<f64>> {
    let (m, n) = a.shape();
    if r.0 > m.min(n) {
        return Err(Error::InvalidRank {
            rank: r.0,
            reason: format!("exceeds min({m}, {n})"),
        });
    }
    if r.0 == 0 {
        return Ok(DMatrix::zeros(m, n));
    }
    let svd = SvdFactors::compute(a)?;
    Ok(svd.rebuild_with(|i, s| if i < r.0 { s } else { 0.0 }))
}

/// Single soft-thresholding of the spectrum: `P max(d - tau, 0) Q^T`.
pub fn svt(a: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(Error::Config(format!("svt threshold must be positive, got {tau}")));
    }
    let svd = SvdFactors::compute(a)?;
    Ok(svd.rebuild_with(|_, s| (s - tau).max(0.0)))
}

/// Split of `A2` into its component in `span(A1)` and the orthogonal rest.
#[derive(Debug, Clone)]
pub struct Projection {
    pub proj: DMatrix<f64>,
    pub resid: DMatrix<f64>,
}

/// Project the columns of `a2` onto the column space of `a1`.
///
/// `a1` must have full column rank in the sense of [`PRIOR_RANK_TOL`].
pub fn project_columnspace(a1: &DMatrix<f64>, a2: &DMatrix<f64>) -> Result<Projection> {
    if a1.nrows() != a2.nrows() {
        return Err(mismatch("project_columnspace", (a1.nrows(), a2.ncols()), a2.shape()));
    }
    let k = a1.ncols();
    if k == 0 {
        return Ok(Projection {
            proj: DMatrix::zeros(a2.nrows(), a2.ncols()),
            resid: a2.clone(),
        });
    }
    if k > a1.nrows() {
        return Err(Error::DegeneratePrior { ratio: 0.0 });
    }
    let svd = SvdFactors::compute(a1)?;
    let s = &svd.singular_values;
    let ratio = if s[0] > 0.0 { s[k - 1] / s[0] } else { 0.0 };
    if !(ratio > PRIOR_RANK_TOL) {
        return Err(Error::DegeneratePrior { ratio });
    }
    let basis = &svd.left;
    let proj = basis * (basis.transpose() * a2);
    let resid = a2 - &proj;
    Ok(Projection { proj, resid })
}

/// Closed form for `min ||A2 - B2||_F` subject to `rank(A1 | B2) <= r`:
/// `B2 = P_{A1}(A2) + H_{r-k}(P_{A1}^perp(A2))`.
pub fn ghs_solve(a1: &DMatrix<f64>, a2: &DMatrix<f64>, r: Rank) -> Result<DMatrix<f64>> {
    let k = a1.ncols();
    if r.0 < k {
        return Err(Error::InvalidRank {
            rank: r.0,
            reason: format!("smaller than the prior block width {k}"),
        });
    }
    let Projection { proj, resid } = project_columnspace(a1, a2)?;
    let free = (r.0 - k).min(resid.nrows().min(resid.ncols()));
    Ok(proj + hard_threshold(&resid, Rank(free))?)
}
