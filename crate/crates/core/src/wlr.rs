//! Weighted low-rank approximation with a column-block weight.
//!
//! Given `A = (A1 | A2)` with `A1: m x k`, a positive weight block
//! `W1: m x k` and a target rank `r >= k`, minimise
//!
//! ```text
//! f(X1, C, U, V) = ||(A1 - X1) .* W1||_F^2 + ||A2 - X1 C - U V||_F^2
//! ```
//!
//! over `X1: m x k`, `C: k x (n-k)`, `U: m x (r-k)`, `V: (r-k) x (n-k)`.
//! Any `(X1 | X2)` of rank at most `r` with `rank(X1) = k` can be written
//! with `X2 = X1 C + U V`, so this is the rank-constrained problem with
//! weight `(W1 | 1)`. The free factors `U, V` are often written `B, D` in
//! the literature; they are renamed here so `B` can mean "background".
//!
//! The solver is block-coordinate descent in the fixed order X1, C, U, V.
//! Each block update is an exact least-squares minimiser with the others
//! held fixed, which makes the objective non-increasing.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{mismatch, Error, Result};
use crate::linalg::{frobenius_sq, lstsq_min_norm, spd_solve, thin_svd};
use crate::lowrank::Rank;
use crate::ops::OpCounter;
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WlrConfig {
    /// Stop once `|f_t - f_{t+1}| / max(f_t, 1e-12)` falls below this.
    pub epsilon: f64,
    pub max_iters: usize,
    /// Relative diagonal shift for normal equations whose Cholesky fails.
    pub ridge: f64,
}

impl Default for WlrConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-6,
            max_iters: 200,
            ridge: 1e-10,
        }
    }
}

impl WlrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters < 1 {
            return Err(Error::Config("max_iters must be at least 1".into()));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Config(format!("ridge must be non-negative, got {}", self.ridge)));
        }
        Ok(())
    }
}

/// The `m x k` weight block `W1`; the weight on `A2` is implicitly all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    w1: DMatrix<f64>,
}

impl WeightMatrix {
    pub fn new(w1: DMatrix<f64>) -> Result<Self> {
        if let Some(bad) = w1.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(Error::Config(format!("weights must be positive and finite, got {bad}")));
        }
        Ok(Self { w1 })
    }

    pub fn constant(m: usize, k: usize, value: f64) -> Result<Self> {
        Self::new(DMatrix::from_element(m, k, value))
    }

    /// Entries drawn i.i.d. uniform on `[alpha, beta]`.
    pub fn uniform<R: Rng + ?Sized>(m: usize, k: usize, alpha: f64, beta: f64, rng: &mut R) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= beta && beta.is_finite()) {
            return Err(Error::Config(format!(
                "weight interval must satisfy 0 < alpha <= beta, got [{alpha}, {beta}]"
            )));
        }
        let w1 = if alpha == beta {
            DMatrix::from_element(m, k, alpha)
        } else {
            DMatrix::from_fn(m, k, |_, _| rng.random_range(alpha..=beta))
        };
        Self::new(w1)
    }

    pub fn w1(&self) -> &DMatrix<f64> {
        &self.w1
    }
}

/// The four factor blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct WlrState {
    pub x1: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl WlrState {
    pub fn zeros(m: usize, k: usize, n2: usize, free: usize) -> Self {
        Self {
            x1: DMatrix::zeros(m, k),
            c: DMatrix::zeros(k, n2),
            u: DMatrix::zeros(m, free),
            v: DMatrix::zeros(free, n2),
        }
    }

    /// `X1 C + U V`.
    pub fn second_block(&self) -> DMatrix<f64> {
        &self.x1 * &self.c + &self.u * &self.v
    }

    /// `(X1 | X1 C + U V)`.
    pub fn low_rank(&self) -> DMatrix<f64> {
        let second = self.second_block();
        let (m, k) = self.x1.shape();
        let mut out = DMatrix::zeros(m, k + second.ncols());
        out.columns_mut(0, k).copy_from(&self.x1);
        out.columns_mut(k, second.ncols()).copy_from(&second);
        out
    }

    fn is_finite(&self) -> bool {
        [&self.x1, &self.c, &self.u, &self.v]
            .iter()
            .all(|m| m.iter().all(|v| v.is_finite()))
    }
}

#[derive(Debug, Clone)]
pub struct WlrResult {
    pub x1: DMatrix<f64>,
    pub low_rank: DMatrix<f64>,
    /// Objective at the initial point followed by one value per iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub state: WlrState,
    /// Model flop count for the whole solve, including initialisation.
    pub flops: u64,
}

impl WlrResult {
    pub fn final_objective(&self) -> f64 {
        *self.objective_trace.last().expect("trace is never empty")
    }
}

/// One weighted low-rank problem instance.
pub struct WlrProblem<'a> {
    a1: &'a DMatrix<f64>,
    a2: &'a DMatrix<f64>,
    w1: &'a DMatrix<f64>,
    rank: usize,
    ridge: f64,
    ops: OpCounter,
}

impl<'a> WlrProblem<'a> {
    pub fn new(a1: &'a DMatrix<f64>, a2: &'a DMatrix<f64>, weights: &'a WeightMatrix, r: Rank) -> Result<Self> {
        let (m, k) = a1.shape();
        if a2.nrows() != m {
            return Err(mismatch("A2", (m, a2.ncols()), a2.shape()));
        }
        if weights.w1.shape() != (m, k) {
            return Err(mismatch("W1", (m, k), weights.w1.shape()));
        }
        if r.0 < k {
            return Err(Error::InvalidRank {
                rank: r.0,
                reason: format!("smaller than the prior block width {k}"),
            });
        }
        if a1.iter().chain(a2.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("WLR input"));
        }
        Ok(Self {
            a1,
            a2,
            w1: &weights.w1,
            rank: r.0,
            ridge: WlrConfig::default().ridge,
            ops: OpCounter::new(),
        })
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn k(&self) -> usize {
        self.a1.ncols()
    }

    pub fn free_rank(&self) -> usize {
        self.rank - self.k()
    }

    pub fn flops(&self) -> u64 {
        self.ops.get()
    }

    fn check_state(&self, s: &WlrState) -> Result<()> {
        let (m, k) = self.a1.shape();
        let (n2, free) = (self.a2.ncols(), self.free_rank());
        let expect = [
            ("X1", s.x1.shape(), (m, k)),
            ("C", s.c.shape(), (k, n2)),
            ("U", s.u.shape(), (m, free)),
            ("V", s.v.shape(), (free, n2)),
        ];
        for (name, got, want) in expect {
            if got != want {
                return Err(mismatch(name, want, got));
            }
        }
        Ok(())
    }

    /// `||(A1 - X1) .* W1||^2 + ||A2 - X1 C - U V||^2`.
    pub fn objective(&self, s: &WlrState) -> Result<f64> {
        self.check_state(s)?;
        let weighted: f64 = self
            .a1
            .iter()
            .zip(s.x1.iter())
            .zip(self.w1.iter())
            .map(|((a, x), w)| {
                let d = (a - x) * w;
                d * d
            })
            .sum();
        let (m, k) = self.a1.shape();
        let (n2, free) = (self.a2.ncols(), self.free_rank());
        self.ops.matmul(m, k, n2);
        self.ops.matmul(m, free, n2);
        self.ops.add(3 * (m * k + m * n2) as u64);
        Ok(weighted + frobenius_sq(&(self.a2 - s.second_block())))
    }

    /// Warm start: `X1 = A1`, `C` the minimum-norm least-squares fit of
    /// `A1 C ~ A2`, and `U V` the best rank-`(r-k)` approximation of the
    /// remaining residual.
    pub fn init(&self) -> Result<WlrState> {
        let (m, k) = self.a1.shape();
        let n2 = self.a2.ncols();
        let free = self.free_rank();
        let x1 = self.a1.clone();
        let c = lstsq_min_norm(&x1, self.a2, 1e-12)?;
        self.ops.svd(m, k);
        self.ops.matmul(k, m, n2);
        let resid = self.a2 - &x1 * &c;
        self.ops.matmul(m, k, n2);

        let mut u = DMatrix::zeros(m, free);
        let mut v = DMatrix::zeros(free, n2);
        if free > 0 {
            let (left, sigma, right) = thin_svd(&resid)?;
            self.ops.svd(m, n2);
            for (i, s) in sigma.iter().take(free).enumerate() {
                let root = s.sqrt();
                u.column_mut(i).copy_from(&(left.column(i) * root));
                v.row_mut(i).copy_from(&(right.column(i).transpose() * root));
            }
        }
        let state = WlrState { x1, c, u, v };
        if !state.is_finite() {
            return Err(Error::NumericalFailure {
                stage: "init",
                iteration: 0,
            });
        }
        Ok(state)
    }

    /// Row-wise exact update of `X1`:
    /// `x_i (diag(w_i^2) + C C^T) = (A1 .* W1 .* W1 + (A2 - U V) C^T)_i`.
    ///
    /// Rows are independent and solved in parallel.
    pub fn update_x1(&self, s: &WlrState) -> Result<DMatrix<f64>> {
        self.check_state(s)?;
        let (m, k) = self.a1.shape();
        let n2 = self.a2.ncols();
        if k == 0 {
            return Ok(DMatrix::zeros(m, 0));
        }
        let resid = self.a2 - &s.u * &s.v;
        let cct = &s.c * s.c.transpose();
        let mut rhs = &resid * s.c.transpose();
        for ((e, a), w) in rhs.iter_mut().zip(self.a1.iter()).zip(self.w1.iter()) {
            *e += a * w * w;
        }
        self.ops.matmul(m, self.free_rank(), n2);
        self.ops.matmul(k, n2, k);
        self.ops.matmul(m, n2, k);
        self.ops.add(3 * (m * k) as u64);
        self.ops.add(m as u64 * (k * k * k / 3 + 2 * k * k + k) as u64);

        let ridge = self.ridge;
        let (w1, cct, rhs) = (self.w1, &cct, &rhs);
        let rows: Vec<Result<Vec<f64>>> = par::map_range(m, |i| {
            let mut gram = cct.clone();
            for j in 0..k {
                gram[(j, j)] += w1[(i, j)] * w1[(i, j)];
            }
            let b = rhs.row(i).transpose();
            let x = spd_solve(&gram, &DMatrix::from_column_slice(k, 1, b.as_slice()), ridge)?;
            Ok(x.iter().copied().collect())
        });
        let mut x1 = DMatrix::zeros(m, k);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row?.into_iter().enumerate() {
                x1[(i, j)] = v;
            }
        }
        Ok(x1)
    }

    /// `C = (X1^T X1)^{-1} X1^T (A2 - U V)`.
    pub fn update_c(&self, s: &WlrState) -> Result<DMatrix<f64>> {
        self.check_state(s)?;
        let (m, k) = s.x1.shape();
        let n2 = self.a2.ncols();
        if k == 0 {
            return Ok(DMatrix::zeros(0, n2));
        }
        let resid = self.a2 - &s.u * &s.v;
        let gram = s.x1.transpose() * &s.x1;
        let rhs = s.x1.transpose() * resid;
        self.ops.matmul(m, self.free_rank(), n2);
        self.ops.matmul(k, m, k);
        self.ops.matmul(k, m, n2);
        self.ops.spd_solve(k, n2);
        spd_solve(&gram, &rhs, self.ridge)
    }

    /// `U = R V^T (V V^T)^{-1}` then `V = (U^T U)^{-1} U^T R` with
    /// `R = A2 - X1 C`, in that order.
    pub fn update_uv(&self, s: &WlrState) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_state(s)?;
        let free = self.free_rank();
        if free == 0 {
            return Ok((s.u.clone(), s.v.clone()));
        }
        let (m, k) = s.x1.shape();
        let n2 = self.a2.ncols();
        let resid = self.a2 - &s.x1 * &s.c;
        self.ops.matmul(m, k, n2);

        let vvt = &s.v * s.v.transpose();
        let v_rt = &s.v * resid.transpose();
        let u = spd_solve(&vvt, &v_rt, self.ridge)?.transpose();
        self.ops.matmul(free, n2, free);
        self.ops.matmul(free, n2, m);
        self.ops.spd_solve(free, m);

        let utu = u.transpose() * &u;
        let ut_r = u.transpose() * &resid;
        let v = spd_solve(&utu, &ut_r, self.ridge)?;
        self.ops.matmul(free, m, free);
        self.ops.matmul(free, m, n2);
        self.ops.spd_solve(free, n2);
        Ok((u, v))
    }

    /// One sweep X1, C, U, V.
    pub fn step(&self, s: &WlrState) -> Result<WlrState> {
        let x1 = self.update_x1(s)?;
        let next = WlrState { x1, ..s.clone() };
        let c = self.update_c(&next)?;
        let next = WlrState { c, ..next };
        let (u, v) = self.update_uv(&next)?;
        Ok(WlrState { u, v, ..next })
    }

    /// Iterate from `start` until the relative objective decrease drops
    /// below `config.epsilon` or `config.max_iters` sweeps have run.
    pub fn run_from(&self, start: WlrState, config: &WlrConfig) -> Result<WlrResult> {
        config.validate()?;
        let mut state = start;
        let mut trace = vec![self.objective(&state)?];
        let mut converged = false;
        let mut iterations = 0;
        for it in 1..=config.max_iters {
            let next = self.step(&state).map_err(|e| match e {
                Error::NumericalFailure { stage, .. } => Error::NumericalFailure { stage, iteration: it },
                Error::NonFinite(stage) => Error::NumericalFailure { stage, iteration: it },
                other => other,
            })?;
            if !next.is_finite() {
                return Err(Error::NumericalFailure {
                    stage: "block update",
                    iteration: it,
                });
            }
            let f_prev = *trace.last().expect("non-empty");
            let f_next = self.objective(&next)?;
            if !f_next.is_finite() {
                return Err(Error::NumericalFailure {
                    stage: "objective",
                    iteration: it,
                });
            }
            trace.push(f_next);
            state = next;
            iterations = it;
            if (f_prev - f_next).abs() / f_prev.max(1e-12) < config.epsilon {
                converged = true;
                break;
            }
        }
        let low_rank = state.low_rank();
        Ok(WlrResult {
            x1: state.x1.clone(),
            low_rank,
            objective_trace: trace,
            iterations,
            converged,
            state,
            flops: self.ops.get(),
        })
    }
}

/// Solve the weighted problem for `(A1 | A2)` from the warm start.
pub fn solve(
    a1: &DMatrix<f64>,
    a2: &DMatrix<f64>,
    weights: &WeightMatrix,
    r: Rank,
    config: &WlrConfig,
) -> Result<WlrResult> {
    config.validate()?;
    let problem = WlrProblem::new(a1, a2, weights, r)?.with_ridge(config.ridge);
    let start = problem.init()?;
    problem.run_from(start, config)
}
