//! Closed-form spectrum of step potentials V = M on [x_minus, pi], 0 before,
//! with Dirichlet conditions and p = 1.
//!
//! Eigenvalues are the zeros of a matching residual assembled from the
//! Dirichlet solutions of the two constant pieces. The residual is kept in
//! product (Wronskian) form rather than as a difference of cotangents, so it
//! has no poles, and the hyperbolic factors are normalized by cosh so nothing
//! overflows; zeros are unchanged. One analytic expression covers all three
//! branches lambda < M, lambda = M, lambda > M.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::roots::{bisect, brent};

/// Which side of lambda = M an eigenvalue falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Branch {
    /// lambda > M: trigonometric solution on the step
    Trig,
    /// lambda < M: hyperbolic solution on the step
    Tanh,
    /// lambda = M: linear solution on the step
    Degenerate,
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct StepEigenvalue {
    pub lambda: f64,
    pub branch: Branch,
    /// matching residual at the root (should be ~0)
    pub residual: f64,
}

/// Variables of the large-M rescaling: mu = M^{-1/2}, y = sqrt(M) x_minus,
/// and exactly one of r (lambda > M), s (lambda < M), or the degenerate flag.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RescaledState {
    pub mu: f64,
    pub y: f64,
    pub r: Option<f64>,
    pub s: Option<f64>,
    pub degenerate: bool,
}

impl RescaledState {
    /// Inverse of `rescale`: recover (lambda, m, x_minus).
    pub fn unrescale(&self) -> (f64, f64, f64) {
        let m = 1.0 / (self.mu * self.mu);
        let x_minus = self.y * self.mu;
        let lambda = if self.degenerate {
            m
        } else if let Some(r) = self.r {
            m + r * r
        } else {
            m - self.s.unwrap() * self.s.unwrap()
        };
        (lambda, m, x_minus)
    }
}

const DEGENERATE_REL_TOL: f64 = 1e-9;

/// Exact change of variables between (lambda, M, x_minus) and the rescaled
/// state; round-trips at machine precision.
pub fn rescale(lambda: f64, m: f64, x_minus: f64) -> Result<RescaledState> {
    if !(m > 0.0) {
        return Err(Error::InvalidInput(format!("step height {m} must be positive")));
    }
    let mu = 1.0 / m.sqrt();
    let y = m.sqrt() * x_minus;
    let tol = DEGENERATE_REL_TOL * (1.0 + m.abs());
    if (lambda - m).abs() <= tol {
        return Ok(RescaledState { mu, y, r: None, s: None, degenerate: true });
    }
    if lambda > m {
        Ok(RescaledState { mu, y, r: Some((lambda - m).sqrt()), s: None, degenerate: false })
    } else {
        Ok(RescaledState { mu, y, r: None, s: Some((m - lambda).sqrt()), degenerate: false })
    }
}

/// (C, S) for the solution of u'' = omega u with u(0) = 0, u'(0) = 1 over a
/// segment of length `len`: u(len) = S * sigma, u'(len) = C * sigma for a
/// common positive factor sigma (cosh in the hyperbolic case, else 1).
fn normalized_pair(omega: f64, len: f64) -> (f64, f64) {
    let z = omega * len * len;
    if z > 1e-12 {
        let kap = omega.sqrt();
        (1.0, (kap * len).tanh() / kap)
    } else if z < -1e-12 {
        let k = (-omega).sqrt();
        ((k * len).cos(), (k * len).sin() / k)
    } else {
        (1.0 + z / 2.0, len * (1.0 + z / 6.0))
    }
}

/// Matching residual whose zeros in lambda are exactly the eigenvalues of the
/// step potential. Continuous in lambda across all branches, bounded, and
/// free of spurious zeros (it is the Wronskian of the two one-sided
/// solutions, up to a positive factor).
pub fn matching_residual(lambda: f64, m: f64, x_minus: f64) -> Result<f64> {
    if !(x_minus > 0.0 && x_minus < PI) {
        return Err(Error::InvalidInput(format!("x_minus {x_minus} outside (0, pi)")));
    }
    if !(m >= 0.0) {
        return Err(Error::InvalidInput(format!("step height {m} must be nonnegative")));
    }
    let (c_l, s_l) = normalized_pair(-lambda, x_minus);
    let (c_r, s_r) = normalized_pair(m - lambda, PI - x_minus);
    Ok(s_l * c_r + c_l * s_r)
}

/// The lambda = M matching condition in the form derived from C^1 matching of
/// sin(sqrt(M) x) against a linear tail: sin(sqrt(M) x_minus)/sqrt(M)
/// + (pi - x_minus) cos(sqrt(M) x_minus).
pub fn degenerate_condition(m: f64, x_minus: f64) -> Result<f64> {
    matching_residual(m, m, x_minus)
}

/// Alternate reduced form sqrt(M)(pi - x_minus) + sin(sqrt(M) x_minus); kept
/// for comparison only (it drops a cosine factor and is sign-definite for
/// sqrt(M)(pi - x_minus) > 1), and is not used by the solver.
pub fn degenerate_condition_sine_form(m: f64, x_minus: f64) -> f64 {
    m.sqrt() * (PI - x_minus) + (m.sqrt() * x_minus).sin()
}

/// Location in (pi/(2 sqrt(M)), pi/sqrt(M)) where an eigenvalue exactly at
/// lambda = M is possible (the first root of the degenerate condition).
pub fn degenerate_location(m: f64) -> Result<f64> {
    if !(m > 1.0) {
        return Err(Error::InvalidInput("degenerate location needs M > 1".into()));
    }
    let lo = PI / (2.0 * m.sqrt()) * 1.000001;
    let hi = (PI / m.sqrt()).min(PI * 0.999999);
    bisect(|x| degenerate_condition(m, x).unwrap(), lo, hi, 1e-15, 200)
}

fn classify_branch(lambda: f64, m: f64) -> Branch {
    let tol = DEGENERATE_REL_TOL * (1.0 + m.abs());
    if (lambda - m).abs() <= tol {
        Branch::Degenerate
    } else if lambda > m {
        Branch::Trig
    } else {
        Branch::Tanh
    }
}

/// Rescaled trig-branch equation (lambda > M), zero at eigenvalues:
/// tan(r(pi - mu y)) + mu (r / sqrt(1 + mu^2 r^2)) tan(sqrt(1 + mu^2 r^2) y).
pub fn rescaled_residual_trig(r: f64, mu: f64, y: f64) -> f64 {
    let root = (1.0 + mu * mu * r * r).sqrt();
    (r * (PI - mu * y)).tan() + mu * (r / root) * (root * y).tan()
}

/// Rescaled hyperbolic-branch equation (lambda < M):
/// tanh(s(pi - mu y)) + mu (s / sqrt(1 - mu^2 s^2)) tan(sqrt(1 - mu^2 s^2) y).
pub fn rescaled_residual_tanh(s: f64, mu: f64, y: f64) -> f64 {
    let root = (1.0 - mu * mu * s * s).sqrt();
    (s * (PI - mu * y)).tanh() + mu * (s / root) * (root * y).tan()
}

/// Interior zeros of the matched eigenfunction at eigenvalue lambda.
fn analytic_zero_count(lambda: f64, m: f64, x_minus: f64) -> usize {
    let mut count = 0usize;
    let a = lambda.max(0.0).sqrt() * x_minus / PI;
    count += (a - 1e-9).max(0.0).floor() as usize;
    if lambda > m {
        let b = (lambda - m).sqrt() * (PI - x_minus) / PI;
        count += (b - 1e-9).max(0.0).floor() as usize;
    }
    count
}

fn near_interface_node(lambda: f64, m: f64, x_minus: f64) -> bool {
    let a = lambda.max(0.0).sqrt() * x_minus / PI;
    if (a - a.round()).abs() < 1e-6 && a.round() >= 1.0 {
        return true;
    }
    if lambda > m {
        let b = (lambda - m).sqrt() * (PI - x_minus) / PI;
        if (b - b.round()).abs() < 1e-6 && b.round() >= 1.0 {
            return true;
        }
    }
    false
}

/// The k lowest eigenvalues of the step potential (k <= 4 by design).
pub fn step_eigenvalues(m: f64, x_minus: f64, k: usize) -> Result<Vec<StepEigenvalue>> {
    if k == 0 || k > 4 {
        return Err(Error::InvalidInput(format!("k = {k} outside the supported range 1..=4")));
    }
    if !(x_minus > 0.0 && x_minus < PI) {
        return Err(Error::InvalidInput(format!("x_minus {x_minus} outside (0, pi)")));
    }
    if !(m >= 0.0) {
        return Err(Error::InvalidInput(format!("step height {m} must be nonnegative")));
    }
    let mut out: Vec<StepEigenvalue> = Vec::with_capacity(k);
    let mut lambda = 1e-9;
    let mut f_prev = matching_residual(lambda, m, x_minus)?;
    let lambda_cap = m + 16.0 * (k as f64 + 2.0) * (k as f64 + 2.0) + 100.0;
    let mut guard = 0usize;
    while out.len() < k {
        guard += 1;
        if guard > 2_000_000 || lambda > lambda_cap {
            return Err(Error::NonConvergence(format!(
                "found {} of {k} step eigenvalues below lambda = {lambda:.3}",
                out.len()
            )));
        }
        // phase-derivative-controlled scan: never advance the combined
        // oscillation argument by more than ~0.45 pi per step
        let mut dphase = x_minus / (2.0 * lambda.max(0.25).sqrt());
        if lambda >= m {
            dphase += (PI - x_minus) / (2.0 * (lambda - m).max(0.25).sqrt());
        }
        let step = 0.45 * PI / dphase;
        let mut next = lambda + step;
        // eigenvalues cluster just above the barrier height, where the step
        // phase turns oscillatory; never jump across lambda = m
        if lambda < m && next > m {
            next = m;
        }
        let f_next = matching_residual(next, m, x_minus)?;
        if f_prev == 0.0 {
            out.push(StepEigenvalue { lambda, branch: classify_branch(lambda, m), residual: 0.0 });
        } else if f_prev * f_next < 0.0 {
            let root = brent(
                |l| matching_residual(l, m, x_minus).unwrap(),
                lambda,
                next,
                1e-13 * (1.0 + next),
                200,
            )?;
            out.push(StepEigenvalue {
                lambda: root,
                branch: classify_branch(root, m),
                residual: matching_residual(root, m, x_minus)?,
            });
        }
        lambda = next;
        f_prev = f_next;
    }
    // branch-handling self check: the matched eigenfunction of the n-th
    // eigenvalue must have n-1 interior zeros
    for (i, ev) in out.iter().enumerate() {
        if near_interface_node(ev.lambda, m, x_minus) {
            continue;
        }
        let zeros = analytic_zero_count(ev.lambda, m, x_minus);
        if zeros != i {
            return Err(Error::OscillationMismatch { index: i + 1, zeros });
        }
    }
    Ok(out)
}

/// Relative C^1 defect of the matched eigenfunction at the interface;
/// small exactly at eigenvalues.
pub fn c1_residual(lambda: f64, m: f64, x_minus: f64) -> Result<f64> {
    let (c_l, s_l) = normalized_pair(-lambda, x_minus);
    let (c_r, s_r) = normalized_pair(m - lambda, PI - x_minus);
    let num = (s_l * c_r + c_l * s_r).abs();
    let den = (s_l * c_r).abs() + (c_l * s_r).abs() + 1e-300;
    Ok(num / den)
}

/// Normalized eigenfunction magnitudes |u_n(x_minus)| at the interface for
/// the k lowest eigenvalues; closed-form norms keep this exact even when the
/// eigenfunction concentrates on a region far below any grid resolution.
pub fn interface_amplitudes(m: f64, x_minus: f64, k: usize) -> Result<Vec<f64>> {
    let evs = step_eigenvalues(m, x_minus, k)?;
    evs.iter().map(|ev| interface_amplitude(ev.lambda, m, x_minus)).collect()
}

/// |u(x_minus)| for the normalized eigenfunction at eigenvalue lambda.
pub fn interface_amplitude(lambda: f64, m: f64, x_minus: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidInput("interface amplitude needs lambda > 0".into()));
    }
    let kl = lambda.sqrt();
    let a = x_minus;
    let b = PI - x_minus;
    // left piece sin(k x)/k
    let u_a = (kl * a).sin() / kl;
    let du_a = (kl * a).cos();
    let norm_left = (a / 2.0 - (2.0 * kl * a).sin() / (4.0 * kl)) / (kl * kl);

    let omega = lambda - m; // right piece solves u'' = -omega u
    let z = omega * b * b;
    let (u_at_interface, norm_right) = if z > 1e-12 {
        let r = omega.sqrt();
        if (r * b).sin().abs() > 1e-6 {
            // value-matched: u = u_a sin(r t)/sin(r b)
            let j = (b / 2.0 - (2.0 * r * b).sin() / (4.0 * r)) / (r * b).sin().powi(2);
            (u_a, u_a * u_a * j)
        } else {
            // node at the interface: derivative-matched
            let c = du_a / (r * b).cos();
            let u_val = c * (r * b).sin() / r;
            let i_raw = (b / 2.0 - (2.0 * r * b).sin() / (4.0 * r)) / (r * r);
            (u_val, c * c * i_raw)
        }
    } else if z < -1e-12 {
        let s = (-omega).sqrt();
        let sb = s * b;
        // u = u_a sinh(s t)/sinh(s b); coth/inverse-sinh^2 forms cannot overflow
        let coth = 1.0 / sb.tanh();
        let inv_sinh2 = if sb > 300.0 { 0.0 } else { 1.0 / sb.sinh().powi(2) };
        let j = coth / (2.0 * s) - b * inv_sinh2 / 2.0;
        (u_a, u_a * u_a * j)
    } else {
        // linear tail u = u_a (t/b)
        (u_a, u_a * u_a * b / 3.0)
    };
    let norm2 = norm_left + norm_right;
    Ok((u_at_interface * u_at_interface / norm2).sqrt())
}
