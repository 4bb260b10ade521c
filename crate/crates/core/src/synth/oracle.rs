//! Brute-force reference solvers used to cross-check the WLR solver.
//!
//! Everything here is written with explicit loops and its own Gaussian
//! elimination so it shares no numerical code path with [`crate::wlr`].

#![allow(clippy::needless_range_loop)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::wlr::WlrState;

/// Solve the square system `a x = b` (row-major `a`) by Gaussian elimination
/// with partial pivoting. Pivots below `1e-300` are treated as zero and the
/// matching unknown is set to zero.
fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    let cols = b.first().map_or(0, Vec::len);
    let mut skip = vec![false; n];
    for p in 0..n {
        let pivot = (p..n)
            .max_by(|&i, &j| a[i][p].abs().total_cmp(&a[j][p].abs()))
            .expect("non-empty");
        a.swap(p, pivot);
        b.swap(p, pivot);
        if a[p][p].abs() < 1e-300 {
            skip[p] = true;
            continue;
        }
        for i in p + 1..n {
            let f = a[i][p] / a[p][p];
            if f == 0.0 {
                continue;
            }
            for j in p..n {
                a[i][j] -= f * a[p][j];
            }
            for j in 0..cols {
                b[i][j] -= f * b[p][j];
            }
        }
    }
    let mut x = vec![vec![0.0; cols]; n];
    for p in (0..n).rev() {
        if skip[p] {
            continue;
        }
        for j in 0..cols {
            let mut acc = b[p][j];
            for q in p + 1..n {
                acc -= a[p][q] * x[q][j];
            }
            x[p][j] = acc / a[p][p];
        }
    }
    x
}

/// Coefficients `X` minimising `||basis X - a||_F` from the normal equations
/// `(basis^T basis) X = basis^T a`.
pub fn oracle_ls(a: &DMatrix<f64>, basis: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, q) = basis.shape();
    let n = a.ncols();
    assert_eq!(a.nrows(), m, "oracle_ls: row mismatch");
    let mut gram = vec![vec![0.0; q]; q];
    let mut rhs = vec![vec![0.0; n]; q];
    for i in 0..q {
        for j in 0..q {
            gram[i][j] = (0..m).map(|t| basis[(t, i)] * basis[(t, j)]).sum();
        }
        for j in 0..n {
            rhs[i][j] = (0..m).map(|t| basis[(t, i)] * a[(t, j)]).sum();
        }
    }
    let x = gauss_solve(gram, rhs);
    DMatrix::from_fn(q, n, |i, j| x[i][j])
}

fn objective(a1: &DMatrix<f64>, a2: &DMatrix<f64>, w1: &DMatrix<f64>, s: &WlrState) -> f64 {
    let (m, k) = a1.shape();
    let (n2, free) = (a2.ncols(), s.u.ncols());
    let mut total = 0.0;
    for i in 0..m {
        for j in 0..k {
            let d = (a1[(i, j)] - s.x1[(i, j)]) * w1[(i, j)];
            total += d * d;
        }
        for j in 0..n2 {
            let mut fit = 0.0;
            for l in 0..k {
                fit += s.x1[(i, l)] * s.c[(l, j)];
            }
            for l in 0..free {
                fit += s.u[(i, l)] * s.v[(l, j)];
            }
            total += (a2[(i, j)] - fit).powi(2);
        }
    }
    total
}

fn matmul(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), b.ncols(), |i, j| {
        (0..a.ncols()).map(|l| a[(i, l)] * b[(l, j)]).sum()
    })
}

/// One block sweep in the order X1, C, U, V.
fn sweep(a1: &DMatrix<f64>, a2: &DMatrix<f64>, w1: &DMatrix<f64>, s: &WlrState) -> WlrState {
    let (m, k) = a1.shape();
    let n2 = a2.ncols();
    let free = s.u.ncols();

    // X1: row i solves (diag(w_i^2) + C C^T) x = w_i^2 a_i + C (a2_i - (UV)_i)
    let uv = matmul(&s.u, &s.v);
    let mut x1 = DMatrix::zeros(m, k);
    for i in 0..m {
        let mut g = vec![vec![0.0; k]; k];
        let mut b = vec![vec![0.0; 1]; k];
        for p in 0..k {
            for q in 0..k {
                g[p][q] = (0..n2).map(|t| s.c[(p, t)] * s.c[(q, t)]).sum();
            }
            g[p][p] += w1[(i, p)] * w1[(i, p)];
            b[p][0] = w1[(i, p)] * w1[(i, p)] * a1[(i, p)]
                + (0..n2).map(|t| s.c[(p, t)] * (a2[(i, t)] - uv[(i, t)])).sum::<f64>();
        }
        let x = gauss_solve(g, b);
        for p in 0..k {
            x1[(i, p)] = x[p][0];
        }
    }

    let c = if k > 0 {
        oracle_ls(&(a2 - &uv), &x1)
    } else {
        DMatrix::zeros(0, n2)
    };
    let resid = a2 - matmul(&x1, &c);
    let (u, v) = if free > 0 {
        let u = oracle_ls(&resid.transpose(), &s.v.transpose()).transpose();
        let v = oracle_ls(&resid, &u);
        (u, v)
    } else {
        (DMatrix::zeros(m, 0), DMatrix::zeros(0, n2))
    };
    WlrState { x1, c, u, v }
}

/// Run block sweeps from `start` until the objective stops moving; returns
/// the final objective.
pub fn oracle_wlr_from(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    start: WlrState,
    max_sweeps: usize,
    rel_tol: f64,
) -> f64 {
    let mut state = start;
    let mut f = objective(a1, a2, w1, &state);
    for _ in 0..max_sweeps {
        state = sweep(a1, a2, w1, &state);
        let next = objective(a1, a2, w1, &state);
        let done = (f - next).abs() <= rel_tol * f.max(1e-300);
        f = next;
        if done {
            break;
        }
    }
    f
}

/// Best objective over `restarts` random initialisations.
pub fn oracle_wlr(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    w1: &DMatrix<f64>,
    r: usize,
    restarts: usize,
    seed: u64,
) -> f64 {
    let (m, k) = a1.shape();
    let n2 = a2.ncols();
    let free = r - k;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut random = |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    (0..restarts)
        .map(|_| {
            let start = WlrState {
                x1: random(m, k),
                c: random(k, n2),
                u: random(m, free),
                v: random(free, n2),
            };
            oracle_wlr_from(a1, a2, w1, start, 3000, 1e-14)
        })
        .fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::frobenius_sq;
    use crate::lowrank::SvdFactors;

    #[test]
    fn ls_hand_solvable() {
        // [2 0; 0 4] x = [2; 8]
        let basis = DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 4.0]);
        let a = DMatrix::from_row_slice(2, 1, &[2.0, 8.0]);
        let x = oracle_ls(&a, &basis);
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15);
        // [1 1; 1 -1] x = [3; 1] -> x = [2, 1]
        let basis = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, -1.0]);
        let a = DMatrix::from_row_slice(2, 1, &[3.0, 1.0]);
        let x = oracle_ls(&a, &basis);
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn ls_orthonormal_basis() {
        let basis = DMatrix::from_fn(6, 3, |i, j| (i * 7 + j * 3) as f64 % 5.0 - 2.0)
            .qr()
            .q();
        let a = DMatrix::from_fn(6, 4, |i, j| ((i + 2 * j) % 3) as f64);
        let x = oracle_ls(&a, &basis);
        assert!((x - basis.transpose() * &a).amax() < 1e-12);
    }

    #[test]
    fn wlr_oracle_rank_r_input_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut random = |r: usize, c: usize| DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0));
        let a = random(6, 3) * random(3, 8);
        let a1 = a.columns(0, 2).into_owned();
        let a2 = a.columns(2, 6).into_owned();
        let w1 = DMatrix::from_element(6, 2, 5.0);
        assert!(oracle_wlr(&a1, &a2, &w1, 3, 5, 2) < 1e-10);
    }

    #[test]
    fn wlr_oracle_svd_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a2 = DMatrix::from_fn(7, 6, |_, _| rng.random_range(-1.0..1.0));
        let a1 = DMatrix::zeros(7, 0);
        let w1 = DMatrix::zeros(7, 0);
        let best = oracle_wlr(&a1, &a2, &w1, 2, 5, 4);
        let s = SvdFactors::compute(&a2).unwrap().singular_values;
        let tail: f64 = s.iter().skip(2).map(|v| v * v).sum();
        assert!((best - tail).abs() <= 1e-8 * frobenius_sq(&a2));
    }
}
