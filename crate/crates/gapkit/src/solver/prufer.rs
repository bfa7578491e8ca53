//! Eigenvalue location by bidirectional Prufer phase matching and
//! reconstruction of normalized eigenfunctions.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::{BoundaryConditions, CoefficientP, Potential};
use crate::roots::brent;

use super::engine::{propagate_sampling, Sample, Shooter};
use super::{count_sign_changes, simpson, EigenSolution, GapResult, SolverOptions};

impl Shooter {
    /// n-th eigenvalue (1-based): the unique root of phase_miss(lambda) = n pi.
    pub(crate) fn eigenvalue(&self, n: usize, tol: f64) -> Result<f64> {
        let target = n as f64 * PI;
        let mut lo = self.vmin - 1.0;
        let mut width = 4.0;
        let mut guard = 0;
        while self.phase_miss(lo) >= target {
            lo -= width;
            width *= 2.0;
            guard += 1;
            if guard > 120 {
                return Err(Error::NonConvergence("no lower phase bracket".into()));
            }
        }
        let mut hi = lo + 4.0;
        guard = 0;
        while self.phase_miss(hi) <= target {
            hi = lo + (hi - lo) * 2.0;
            guard += 1;
            if guard > 120 {
                return Err(Error::NonConvergence("no upper phase bracket".into()));
            }
        }
        self.refine_root(target, lo, hi, tol)
    }

    /// Same as `eigenvalue` but trying a warm bracket first.
    pub(crate) fn eigenvalue_warm(&self, n: usize, lo: f64, hi: f64, tol: f64) -> Result<f64> {
        let target = n as f64 * PI;
        if lo < hi && self.phase_miss(lo) < target && self.phase_miss(hi) > target {
            return self.refine_root(target, lo, hi, tol);
        }
        self.eigenvalue(n, tol)
    }

    fn refine_root(&self, target: f64, lo: f64, hi: f64, tol: f64) -> Result<f64> {
        let scale = 1.0 + lo.abs().max(hi.abs());
        brent(|lam| self.phase_miss(lam) - target, lo, hi, tol * scale, 200)
    }

    /// Raw two-sided samples of the eigenfunction at `lambda` on the grid
    /// points `xs` (sorted). Returns per-point (u, w, exp2) before
    /// normalization, plus the interior zero count.
    fn eigenfunction_samples(&self, lambda: f64, xs: &[f64]) -> (Vec<Sample>, i64) {
        let split = xs.partition_point(|&x| x <= self.x_match);
        let (left_samples, left_end) = propagate_sampling(&self.left, lambda, self.alpha, &xs[..split]);
        let reflected: Vec<f64> = xs[split..].iter().rev().map(|&x| PI - x).collect();
        let (right_samples, right_end) =
            propagate_sampling(&self.right, lambda, self.beta_tilde, &reflected);

        // collinear match of the two solutions at x_match
        let (ul, wl, el) = (left_end.u, left_end.w, left_end.exp2);
        let (ur, wr, er) = (right_end.u, -right_end.w, right_end.exp2);
        let c = (ul * ur + wl * wr) / (ur * ur + wr * wr);
        let de = el - er;

        let mut out = left_samples;
        for s in right_samples.into_iter().rev() {
            out.push(Sample { x: PI - s.x, u: c * s.u, w: -c * s.w, exp2: s.exp2 + de });
        }
        let zeros = left_end.crossings + right_end.crossings;
        (out, zeros)
    }
}

fn uniform_grid(panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| PI * i as f64 / panels as f64).collect()
}

/// Normalize raw samples to unit L2 norm, fix the sign so u > 0 just inside
/// the left endpoint, and package the eigensolution.
fn assemble(
    index: usize,
    lambda: f64,
    xs: Vec<f64>,
    samples: Vec<Sample>,
) -> Result<EigenSolution> {
    let emax = samples.iter().map(|s| s.exp2).max().unwrap_or(0);
    let mut us: Vec<f64> = Vec::with_capacity(samples.len());
    let mut ws: Vec<f64> = Vec::with_capacity(samples.len());
    for s in &samples {
        let scale = 2f64.powi((s.exp2 - emax).clamp(-2000, 0) as i32);
        us.push(s.u * scale);
        ws.push(s.w * scale);
    }
    let h = xs[1] - xs[0];
    let sq: Vec<f64> = us.iter().map(|u| u * u).collect();
    let norm2 = simpson(&sq, h);
    if !(norm2 > 0.0) {
        return Err(Error::NonConvergence("eigenfunction normalization failed".into()));
    }
    let inv = 1.0 / norm2.sqrt();
    for (u, w) in us.iter_mut().zip(ws.iter_mut()) {
        *u *= inv;
        *w *= inv;
    }
    let sup = us.iter().fold(0.0f64, |m, u| m.max(u.abs()));
    if let Some(first) = us.iter().find(|u| u.abs() > 1e-9 * sup) {
        if *first < 0.0 {
            for (u, w) in us.iter_mut().zip(ws.iter_mut()) {
                *u = -*u;
                *w = -*w;
            }
        }
    }
    let sign_changes = count_sign_changes(&us, 1e-8 * sup);
    Ok(EigenSolution { index, lambda, xs, us, ws, sign_changes, sup_norm: sup })
}

/// Lowest k eigenpairs by Prufer shooting.
///
/// Eigenvalues are bracketed by the monotone two-sided phase and refined to
/// `opts.tol * (1 + |lambda|)`. On chains with non-constant coefficients the
/// frozen-midpoint eigenvalue carries an O(h^2) bias; with `opts.richardson`
/// a second solve at half resolution removes the leading term.
pub fn shoot_eigenvalues(
    p: &CoefficientP,
    v: &Potential,
    bc: BoundaryConditions,
    k: usize,
    opts: &SolverOptions,
) -> Result<Vec<EigenSolution>> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if opts.grid < 16 || opts.grid % 2 != 0 {
        return Err(Error::InvalidInput("grid must be an even count >= 16".into()));
    }
    let fine = Shooter::build(p, v, bc, opts.refine)?;
    let coarse = if !fine.exact && opts.richardson {
        Some(Shooter::build(p, v, bc, (opts.refine / 2).max(8))?)
    } else {
        None
    };
    let xs = uniform_grid(opts.grid);
    let mut out = Vec::with_capacity(k);
    for n in 1..=k {
        let lam_fine = fine.eigenvalue(n, opts.tol)?;
        let lambda = match &coarse {
            Some(ch) => {
                let lam_coarse = ch.eigenvalue(n, opts.tol)?;
                (4.0 * lam_fine - lam_coarse) / 3.0
            }
            None => lam_fine,
        };
        let (samples, _zeros) = fine.eigenfunction_samples(lam_fine, &xs);
        let sol = assemble(n, lambda, xs.clone(), samples)?;
        if sol.sign_changes != n - 1 {
            return Err(Error::OscillationMismatch { index: n, zeros: sol.sign_changes });
        }
        out.push(sol);
    }
    Ok(out)
}

/// Convenience: two lowest eigenpairs plus the crossing structure.
pub fn solve_gap(
    p: &CoefficientP,
    v: &Potential,
    bc: BoundaryConditions,
    opts: &SolverOptions,
) -> Result<(GapResult, Vec<EigenSolution>)> {
    let sols = shoot_eigenvalues(p, v, bc, 2, opts)?;
    let crossings = super::crossing_points(&sols[0], &sols[1])?;
    let gap = GapResult {
        lambda1: sols[0].lambda,
        lambda2: sols[1].lambda,
        gamma: sols[1].lambda - sols[0].lambda,
        x_minus: crossings.x_minus,
        x_zero: crossings.x_zero,
        x_plus: crossings.x_plus,
    };
    Ok((gap, sols))
}

/// Internal handle for optimization loops: cached shooters with warm
/// restarts for the two lowest eigenvalues.
pub(crate) struct GapEngine {
    fine: Shooter,
    coarse: Option<Shooter>,
    tol: f64,
}

impl GapEngine {
    pub fn new(p: &CoefficientP, v: &Potential, bc: BoundaryConditions, opts: &SolverOptions) -> Result<Self> {
        let fine = Shooter::build(p, v, bc, opts.refine)?;
        let coarse = if !fine.exact && opts.richardson {
            Some(Shooter::build(p, v, bc, (opts.refine / 2).max(8))?)
        } else {
            None
        };
        Ok(GapEngine { fine, coarse, tol: opts.tol })
    }

    /// (lambda1, lambda2), optionally warm-started from a previous solve.
    pub fn lowest_two(&self, warm: Option<(f64, f64, f64)>) -> Result<(f64, f64)> {
        let solve = |sh: &Shooter| -> Result<(f64, f64)> {
            let (l1, l2) = match warm {
                Some((w1, w2, slack)) => (
                    sh.eigenvalue_warm(1, w1 - slack, w1 + slack, self.tol)?,
                    sh.eigenvalue_warm(2, w2 - slack, w2 + slack, self.tol)?,
                ),
                None => (sh.eigenvalue(1, self.tol)?, sh.eigenvalue(2, self.tol)?),
            };
            Ok((l1, l2))
        };
        let (f1, f2) = solve(&self.fine)?;
        match &self.coarse {
            Some(ch) => {
                let (c1, c2) = solve(ch)?;
                Ok(((4.0 * f1 - c1) / 3.0, (4.0 * f2 - c2) / 3.0))
            }
            None => Ok((f1, f2)),
        }
    }
}
