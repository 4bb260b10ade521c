//! Floating-point operation accounting.
//!
//! Counts are model counts derived from operand shapes (a dense `a x b` by
//! `b x c` product costs `2abc`), not hardware counters. They exist so the
//! cost growth of the solver and the pipeline can be checked independently
//! of wall-clock noise.

use std::sync::atomic::{AtomicU64, Ordering};

#[derive(Debug, Default)]
pub struct OpCounter(AtomicU64);

impl OpCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&self, flops: u64) {
        self.0.fetch_add(flops, Ordering::Relaxed);
    }

    pub fn get(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }

    pub fn matmul(&self, a: usize, b: usize, c: usize) {
        self.add(2 * (a * b * c) as u64);
    }

    /// Elementwise pass over an `r x c` block.
    pub fn elementwise(&self, r: usize, c: usize) {
        self.add((r * c) as u64);
    }

    /// Cholesky factorisation of a `k x k` matrix plus `rhs` triangular solve pairs.
    pub fn spd_solve(&self, k: usize, rhs: usize) {
        self.add((k * k * k / 3 + 2 * k * k * rhs) as u64);
    }

    /// Thin SVD of an `m x n` matrix (Golub-Kahan with a preliminary QR).
    pub fn svd(&self, m: usize, n: usize) {
        let (big, small) = (m.max(n) as u64, m.min(n) as u64);
        self.add(4 * big * small * small + 22 * small * small * small);
    }
}
