//! Diagnostics built on the two lowest eigenfunctions: crossing structure of
//! u2^2 - u1^2, first-order eigenvalue derivatives, and the Wronskian
//! identity checks.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::{BoundaryConditions, CoefficientP, Potential};

use super::{shoot_eigenvalues, EigenSolution, SolverOptions};

/// Crossing structure: x_zero is the unique interior zero of u2; x_minus and
/// x_plus are the sign changes of u2^2 - u1^2 (0 resp. pi when a side has no
/// interior crossing).
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct Crossings {
    pub x_minus: f64,
    pub x_zero: f64,
    pub x_plus: f64,
}

fn interp_zero(x0: f64, x1: f64, f0: f64, f1: f64) -> f64 {
    if f1 == f0 {
        0.5 * (x0 + x1)
    } else {
        x0 - f0 * (x1 - x0) / (f1 - f0)
    }
}

/// Locate sign changes of sampled values, ignoring magnitudes below
/// `threshold`; returns linearly interpolated abscissae.
fn sign_change_positions(xs: &[f64], values: &[f64], threshold: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (i, &v) in values.iter().enumerate() {
        if v.abs() <= threshold {
            continue;
        }
        if let Some((j, s)) = last {
            if v.signum() != s {
                out.push(interp_zero(xs[j], xs[i], values[j], values[i]));
            }
        }
        last = Some((i, v.signum()));
    }
    out
}

/// Number of grid sign changes of u2^2 - u1^2 (the two-crossing property
/// bounds this by 2 for any operator of the family).
pub fn difference_sign_changes(sol1: &EigenSolution, sol2: &EigenSolution) -> usize {
    let d: Vec<f64> = sol2.us.iter().zip(sol1.us.iter()).map(|(b, a)| b * b - a * a).collect();
    let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    sign_change_positions(&sol1.xs, &d, 1e-10 * dmax).len()
}

/// Crossing points of the two lowest eigenfunctions.
pub fn crossing_points(sol1: &EigenSolution, sol2: &EigenSolution) -> Result<Crossings> {
    if sol1.xs.len() != sol2.xs.len() {
        return Err(Error::InvalidInput("eigenfunctions sampled on different grids".into()));
    }
    let xs = &sol1.xs;
    // unique interior zero of u2
    let zeros_u2 = sign_change_positions(xs, &sol2.us, 1e-9 * sol2.sup_norm);
    if zeros_u2.len() != 1 {
        return Err(Error::OscillationMismatch { index: 2, zeros: zeros_u2.len() });
    }
    let x_zero = zeros_u2[0];

    let d: Vec<f64> = sol2.us.iter().zip(sol1.us.iter()).map(|(b, a)| b * b - a * a).collect();
    let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let crossings = sign_change_positions(xs, &d, 1e-10 * dmax);
    if crossings.len() > 2 {
        return Err(Error::TooManyCrossings { count: crossings.len() });
    }
    let mut x_minus = 0.0;
    let mut x_plus = PI;
    for c in &crossings {
        if *c < x_zero {
            if x_minus != 0.0 {
                return Err(Error::NonConvergence("two crossings left of x_zero".into()));
            }
            x_minus = *c;
        } else {
            if x_plus != PI {
                return Err(Error::NonConvergence("two crossings right of x_zero".into()));
            }
            x_plus = *c;
        }
    }
    Ok(Crossings { x_minus, x_zero, x_plus })
}

fn interp_u(xs: &[f64], us: &[f64], x: f64) -> f64 {
    let i = match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
        Ok(i) => return us[i],
        Err(i) => i.clamp(1, xs.len() - 1),
    };
    let t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
    us[i - 1] + t * (us[i] - us[i - 1])
}

/// Integral of f(x) * u(x)^2 where f is piecewise linear with possible jumps
/// at its breakpoints: jump-aware composite trapezoid on the union mesh.
fn quad_against_u2(
    sol: &EigenSolution,
    breaks: &[f64],
    f_left_closed: &dyn Fn(f64) -> f64,
    f_left_limit: &dyn Fn(f64) -> f64,
) -> f64 {
    let mut mesh: Vec<f64> = sol.xs.clone();
    for &b in breaks {
        if b > 0.0 && b < PI {
            if let Err(i) = mesh.binary_search_by(|v| v.partial_cmp(&b).unwrap()) {
                mesh.insert(i, b);
            }
        }
    }
    let mut acc = 0.0;
    for w in mesh.windows(2) {
        let (a, b) = (w[0], w[1]);
        let ua = interp_u(&sol.xs, &sol.us, a);
        let ub = interp_u(&sol.xs, &sol.us, b);
        let fa = f_left_closed(a) * ua * ua;
        let fb = f_left_limit(b) * ub * ub;
        acc += 0.5 * (fa + fb) * (b - a);
    }
    acc
}

/// First-order eigenvalue derivative along a potential direction:
/// the integral of dV * u_n^2 over [0, pi].
pub fn feynman_hellmann(sol: &EigenSolution, dv: &Potential) -> Result<f64> {
    let breaks = dv.total_breakpoints();
    Ok(quad_against_u2(
        sol,
        &breaks,
        &|x| dv.evaluate(x).unwrap_or(0.0),
        &|x| dv.eval_total_left_limit(x).unwrap_or(0.0),
    ))
}

/// Directional derivative of the gap Gamma along the straight path from V to
/// `target` at the V end: integral of (u2^2 - u1^2)(target - V).
///
/// When lambda2 is (nearly) degenerate with lambda3 the derivative follows the
/// relabeled analytic branches: the 2x2 direction matrix over the degenerate
/// eigenspace is diagonalized and the lower branch is reported.
pub fn gap_derivative(
    p: &CoefficientP,
    v: &Potential,
    target: &Potential,
    bc: BoundaryConditions,
    opts: &SolverOptions,
) -> Result<f64> {
    let sols = shoot_eigenvalues(p, v, bc, 3, opts)?;
    let mut breaks = v.total_breakpoints();
    for b in target.total_breakpoints() {
        if !breaks.iter().any(|x| (*x - b).abs() < 1e-15) {
            breaks.push(b);
        }
    }
    breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let dir_left = |x: f64| target.evaluate(x).unwrap() - v.evaluate(x).unwrap();
    let dir_lim = |x: f64| target.eval_total_left_limit(x).unwrap() - v.eval_total_left_limit(x).unwrap();

    let d1 = quad_against_u2(&sols[0], &breaks, &dir_left, &dir_lim);
    let degenerate = (sols[2].lambda - sols[1].lambda).abs() < 1e-9 * (1.0 + sols[1].lambda.abs());
    if !degenerate {
        let d2 = quad_against_u2(&sols[1], &breaks, &dir_left, &dir_lim);
        return Ok(d2 - d1);
    }
    // degenerate pair: diagonalize the direction within span{u2, u3}
    let b22 = quad_against_u2(&sols[1], &breaks, &dir_left, &dir_lim);
    let b33 = quad_against_u2(&sols[2], &breaks, &dir_left, &dir_lim);
    let mut mesh = sols[1].xs.clone();
    for &b in &breaks {
        if b > 0.0 && b < PI {
            if let Err(i) = mesh.binary_search_by(|v| v.partial_cmp(&b).unwrap()) {
                mesh.insert(i, b);
            }
        }
    }
    let mut b23 = 0.0;
    for w in mesh.windows(2) {
        let (a, b) = (w[0], w[1]);
        let u2a = interp_u(&sols[1].xs, &sols[1].us, a);
        let u2b = interp_u(&sols[1].xs, &sols[1].us, b);
        let u3a = interp_u(&sols[2].xs, &sols[2].us, a);
        let u3b = interp_u(&sols[2].xs, &sols[2].us, b);
        b23 += 0.5 * (dir_left(a) * u2a * u3a + dir_lim(b) * u2b * u3b) * (b - a);
    }
    let mean = 0.5 * (b22 + b33);
    let disc = (0.25 * (b22 - b33).powi(2) + b23 * b23).sqrt();
    Ok((mean - disc) - d1)
}

/// Grid samples of W = u1 p u2' - u2 p u1' and the residual of the identity
/// W' = (lambda1 - lambda2) u1 u2.
#[derive(Debug, Clone)]
pub struct Wronskian {
    pub xs: Vec<f64>,
    pub values: Vec<f64>,
    /// sup norm of W' - (lambda1 - lambda2) u1 u2 via centered differences
    pub identity_residual: f64,
    pub w_at_0: f64,
    pub w_at_pi: f64,
}

pub fn wronskian_diagnostic(sol1: &EigenSolution, sol2: &EigenSolution, _p: &CoefficientP) -> Result<Wronskian> {
    if sol1.xs.len() != sol2.xs.len() {
        return Err(Error::InvalidInput("eigenfunctions sampled on different grids".into()));
    }
    let n = sol1.xs.len();
    let values: Vec<f64> = (0..n)
        .map(|i| sol1.us[i] * sol2.ws[i] - sol2.us[i] * sol1.ws[i])
        .collect();
    // differentiating W and using (p u')' = (V - lambda) u gives
    // W' = (lambda1 - lambda2) u1 u2
    let dl = sol1.lambda - sol2.lambda;
    let mut residual = 0.0f64;
    for i in 1..n - 1 {
        let dw = (values[i + 1] - values[i - 1]) / (sol1.xs[i + 1] - sol1.xs[i - 1]);
        let rhs = dl * sol1.us[i] * sol2.us[i];
        residual = residual.max((dw - rhs).abs());
    }
    Ok(Wronskian {
        xs: sol1.xs.clone(),
        values: values.clone(),
        identity_residual: residual,
        w_at_0: values[0],
        w_at_pi: values[n - 1],
    })
}

/// Minimum of -d/dx (u2/u1) = -W / (p u1^2) over interior grid points left of
/// x_zero; positive when the eigenfunction ratio is strictly decreasing there.
pub fn monotone_ratio_margin(
    sol1: &EigenSolution,
    sol2: &EigenSolution,
    p: &CoefficientP,
    x_zero: f64,
) -> Result<f64> {
    let w = wronskian_diagnostic(sol1, sol2, p)?;
    let margin = 0.02 * PI;
    let mut min_val = f64::INFINITY;
    for (i, &x) in sol1.xs.iter().enumerate() {
        if x < margin || x > x_zero - margin {
            continue;
        }
        let u1 = sol1.us[i];
        if u1.abs() < 1e-6 * sol1.sup_norm {
            continue;
        }
        min_val = min_val.min(-w.values[i] / (p.eval(x) * u1 * u1));
    }
    if !min_val.is_finite() {
        return Err(Error::InvalidInput("no interior grid points left of x_zero".into()));
    }
    Ok(min_val)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::{Segment, ShapeClass, Sign};

    fn free_pair() -> Vec<EigenSolution> {
        shoot_eigenvalues(
            &CoefficientP::one(),
            &Potential::zero(),
            BoundaryConditions::dirichlet(),
            2,
            &SolverOptions::default(),
        )
        .unwrap()
    }

    #[test]
    fn crossings_of_free_problem() {
        let sols = free_pair();
        let c = crossing_points(&sols[0], &sols[1]).unwrap();
        // |2 cos x| = 1 at pi/3 and 2pi/3; u2 vanishes at pi/2
        assert!((c.x_minus - PI / 3.0).abs() < 1e-3, "x_minus {}", c.x_minus);
        assert!((c.x_zero - PI / 2.0).abs() < 1e-3, "x_zero {}", c.x_zero);
        assert!((c.x_plus - 2.0 * PI / 3.0).abs() < 1e-3, "x_plus {}", c.x_plus);
        assert!((c.x_minus + c.x_plus - PI).abs() < 1e-6, "reflection symmetry");
    }

    #[test]
    fn fh_normalization_direction() {
        let sols = free_pair();
        let one = Potential::constant(1.0);
        let d = feynman_hellmann(&sols[0], &one).unwrap();
        assert!((d - 1.0).abs() < 1e-8, "FH along constant = {d}");
        let zero = Potential::zero();
        assert!(feynman_hellmann(&sols[0], &zero).unwrap().abs() < 1e-14);
    }

    #[test]
    fn fh_half_interval_indicator() {
        let sols = free_pair();
        let chi = Potential::new(
            vec![0.0, PI / 2.0, PI],
            vec![Segment::constant(1.0), Segment::constant(0.0)],
            ShapeClass::None,
            None,
            Sign::Plus,
        )
        .unwrap();
        let d = feynman_hellmann(&sols[0], &chi).unwrap();
        assert!((d - 0.5).abs() < 1e-7, "int_0^{{pi/2}} (2/pi) sin^2 = 1/2, got {d}");
    }

    #[test]
    fn gap_derivative_zero_direction() {
        let v = Potential::zero();
        let d = gap_derivative(
            &CoefficientP::one(),
            &v,
            &v,
            BoundaryConditions::dirichlet(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn gap_derivative_plateau_negative() {
        // raising V inside (x_minus, x_plus) lowers the gap to first order
        let v = Potential::zero();
        let bump = Potential::new(
            vec![0.0, PI / 3.0, 2.0 * PI / 3.0, PI],
            vec![Segment::constant(0.0), Segment::constant(1.0), Segment::constant(0.0)],
            ShapeClass::None,
            None,
            Sign::Plus,
        )
        .unwrap();
        let d = gap_derivative(
            &CoefficientP::one(),
            &v,
            &bump,
            BoundaryConditions::dirichlet(),
            &SolverOptions::default(),
        )
        .unwrap();
        assert!(d < -1e-3, "expected strictly negative derivative, got {d}");
    }

    #[test]
    fn gap_derivative_matches_forward_difference() {
        // first-order accuracy of the directional derivative along the
        // straight blend path, checked at h = 1e-4
        let p = CoefficientP::one();
        let bc = BoundaryConditions::dirichlet();
        let opts = SolverOptions::default();
        let v = Potential::piecewise_constant(
            vec![0.0, 1.0, 2.2, PI],
            &[7.0, 1.0, 4.0],
            ShapeClass::SingleWell,
        )
        .unwrap();
        let target = Potential::piecewise_constant(
            vec![0.0, 0.8, 2.5, PI],
            &[2.0, 5.0, 1.0],
            ShapeClass::None,
        )
        .unwrap();
        let d = gap_derivative(&p, &v, &target, bc, &opts).unwrap();
        let h = 1e-4;
        let gamma = |vv: &Potential| {
            let s = shoot_eigenvalues(&p, vv, bc, 2, &opts).unwrap();
            s[1].lambda - s[0].lambda
        };
        let fd = (gamma(&v.blend(&target, h).unwrap()) - gamma(&v)) / h;
        assert!(
            (d - fd).abs() < 50.0 * h * (1.0 + d.abs()),
            "derivative {d} vs forward difference {fd}"
        );
    }

    #[test]
    fn wronskian_identity_free_problem() {
        let sols = free_pair();
        let p = CoefficientP::one();
        let w = wronskian_diagnostic(&sols[0], &sols[1], &p).unwrap();
        assert!(w.w_at_0.abs() < 1e-9);
        assert!(w.w_at_pi.abs() < 1e-9);
        // centered differences are O(h^2): residual small but not machine zero
        assert!(w.identity_residual < 1e-4, "residual {}", w.identity_residual);
        // closed form: W = u1 u2' - u2 u1' with sines; check one point
        let i = sols[0].xs.len() / 3;
        let x = sols[0].xs[i];
        let wa = (2.0 / PI) * ((x).sin() * 2.0 * (2.0 * x).cos() - (2.0 * x).sin() * x.cos());
        assert!((w.values[i] - wa).abs() < 1e-8);
    }

    #[test]
    fn ratio_strictly_decreasing_left_of_zero() {
        let sols = free_pair();
        let c = crossing_points(&sols[0], &sols[1]).unwrap();
        let m = monotone_ratio_margin(&sols[0], &sols[1], &CoefficientP::one(), c.x_zero).unwrap();
        assert!(m > 0.0, "min of -(u2/u1)' = {m}");
    }
}
