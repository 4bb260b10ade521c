//! Small dense solvers shared by the low-rank primitives and the WLR solver.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Thin SVD with singular values sorted non-ascending.
///
/// Returns `(left, sigma, right)` with `left: m x q`, `right: n x q`,
/// `q = min(m, n)`. Zero-sized inputs give empty factors.
pub(crate) fn thin_svd(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Ok((DMatrix::zeros(m, 0), Vec::new(), DMatrix::zeros(n, 0)));
    }
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("svd input"));
    }
    // nalgebra's bidiagonal SVD can return wrong factors on exactly
    // rank-deficient input, so the decomposition itself is done by faer.
    let mat = faer::Mat::<f64>::from_fn(m, n, |i, j| a[(i, j)]);
    let svd = mat.thin_svd().map_err(|_| Error::NumericalFailure {
        stage: "svd",
        iteration: 0,
    })?;
    let (u, v, d) = (svd.U(), svd.V(), svd.S().column_vector());
    let q = m.min(n);
    let mut order: Vec<usize> = (0..q).collect();
    order.sort_by(|&x, &y| d[y].total_cmp(&d[x]));
    let left = DMatrix::from_fn(m, q, |i, l| u[(i, order[l])]);
    let right = DMatrix::from_fn(n, q, |j, l| v[(j, order[l])]);
    let sigma = order.iter().map(|&l| d[l].max(0.0)).collect();
    Ok((left, sigma, right))
}

/// Least-squares `min ||a x - b||` with the minimum-norm solution on rank
/// deficiency. Singular values below `rel_tol * sigma_1` are discarded.
pub(crate) fn lstsq_min_norm(a: &DMatrix<f64>, b: &DMatrix<f64>, rel_tol: f64) -> Result<DMatrix<f64>> {
    let (left, sigma, right) = thin_svd(a)?;
    let mut x = DMatrix::zeros(a.ncols(), b.ncols());
    let Some(&s1) = sigma.first() else {
        return Ok(x);
    };
    let cutoff = rel_tol * s1;
    for (i, &s) in sigma.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            break;
        }
        let coeff = left.column(i).transpose() * b / s;
        x += right.column(i) * coeff;
    }
    Ok(x)
}

/// Solve `gram * x = rhs` for symmetric positive semi-definite `gram`.
///
/// Cholesky first; on failure retry with `ridge * trace / k` added to the
/// diagonal; if that still fails, use the pseudo-inverse.
pub(crate) fn spd_solve(gram: &DMatrix<f64>, rhs: &DMatrix<f64>, ridge: f64) -> Result<DMatrix<f64>> {
    let k = gram.nrows();
    if k == 0 {
        return Ok(DMatrix::zeros(0, rhs.ncols()));
    }
    if let Some(chol) = gram.clone().cholesky() {
        return Ok(chol.solve(rhs));
    }
    if ridge > 0.0 {
        let scale = (gram.trace() / k as f64).abs().max(f64::MIN_POSITIVE);
        let mut shifted = gram.clone();
        for i in 0..k {
            shifted[(i, i)] += ridge * scale;
        }
        if let Some(chol) = shifted.cholesky() {
            return Ok(chol.solve(rhs));
        }
    }
    lstsq_min_norm(gram, rhs, 1e-13)
}

pub(crate) fn frobenius_sq(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|v| v * v).sum()
}
