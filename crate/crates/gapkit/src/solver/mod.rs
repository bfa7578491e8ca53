//! Eigenvalue solvers for -(p u')' + V u = lambda u on [0, pi] with separated
//! boundary conditions: bidirectional Prufer shooting over exact cell
//! transfers, an independent dense finite-difference oracle, and the
//! diagnostics built on the two lowest eigenfunctions.

mod dense;
mod diagnostics;
pub(crate) mod engine;
mod prufer;

pub use dense::{dense_oracle, dense_oracle_eigenvalues, dense_oracle_richardson};
pub use diagnostics::{
    crossing_points, difference_sign_changes, feynman_hellmann, gap_derivative,
    monotone_ratio_margin, wronskian_diagnostic, Crossings, Wronskian,
};
pub use prufer::{shoot_eigenvalues, solve_gap};
pub(crate) use prufer::GapEngine;

use serde::Serialize;

/// One computed eigenpair with grid samples of the normalized eigenfunction.
#[derive(Debug, Clone, Serialize)]
pub struct EigenSolution {
    /// 1-based index.
    pub index: usize,
    pub lambda: f64,
    pub xs: Vec<f64>,
    pub us: Vec<f64>,
    /// w = p u' samples.
    pub ws: Vec<f64>,
    /// number of interior sign changes (Sturm oscillation: index - 1)
    pub sign_changes: usize,
    pub sup_norm: f64,
}

/// Two lowest eigenvalues, the gap, and the crossing structure of
/// u2^2 - u1^2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GapResult {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma: f64,
    pub x_minus: f64,
    pub x_zero: f64,
    pub x_plus: f64,
}

/// Knobs for the shooting solver.
#[derive(Debug, Clone, Copy)]
pub struct SolverOptions {
    /// output grid panels (Simpson normalization wants an even count)
    pub grid: usize,
    /// absolute-ish eigenvalue tolerance (scaled by 1 + |lambda|)
    pub tol: f64,
    /// cells per pi used to subdivide non-constant coefficient intervals
    pub refine: usize,
    /// two-level h^2 extrapolation of eigenvalues on non-exact chains
    pub richardson: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { grid: 4096, tol: 1e-10, refine: 2048, richardson: true }
    }
}

impl SolverOptions {
    /// cheaper settings for inner optimization loops
    pub fn fast() -> Self {
        SolverOptions { grid: 1024, tol: 1e-10, refine: 192, richardson: true }
    }
}

/// Composite Simpson on a uniform grid of an even number of panels.
pub(crate) fn simpson(values: &[f64], h: f64) -> f64 {
    let n = values.len() - 1;
    debug_assert!(n >= 2 && n % 2 == 0);
    let mut acc = values[0] + values[n];
    for (i, v) in values.iter().enumerate().take(n).skip(1) {
        acc += if i % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    acc * h / 3.0
}

/// Trapezoid rule on an arbitrary sorted mesh.
pub(crate) fn trapezoid(xs: &[f64], values: &[f64]) -> f64 {
    let mut acc = 0.0;
    for i in 1..xs.len() {
        acc += 0.5 * (values[i] + values[i - 1]) * (xs[i] - xs[i - 1]);
    }
    acc
}

/// Count sign changes of a sampled function, ignoring entries below a
/// relative threshold.
pub(crate) fn count_sign_changes(values: &[f64], threshold: f64) -> usize {
    let mut count = 0;
    let mut last = 0.0f64;
    for &v in values {
        if v.abs() <= threshold {
            continue;
        }
        if last != 0.0 && v.signum() != last {
            count += 1;
        }
        last = v.signum();
    }
    count
}
