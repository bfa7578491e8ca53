//! Reduced small-mu system governing the large-height limit of the minimal
//! gap: the roots of tan(pi r) = r/y1 and tanh(pi s) = s/y1, the proxy
//! Gamma = r^2 + s^2, and the limiting constant built from the first positive
//! root of theta = tan(theta).

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::roots::{bisect, brent, golden_min};

/// First positive root of theta = tan(theta) and the induced gap limit.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ThetaConstant {
    pub theta: f64,
    pub limit_gap: f64,
}

/// Solution of the reduced system at a given first-order coefficient y1.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReducedSolution {
    pub y1: f64,
    /// root of tan(pi r) = r / y1 in (1/2, 3/2)
    pub r: f64,
    /// nonnegative root of tanh(pi s) = s / y1 (zero at and below y1 = 1/pi)
    pub s: f64,
    /// no positive s-root exists (y1 < 1/pi)
    pub s_missing: bool,
    /// eta = y1 (y1 - 1/pi)
    pub eta: f64,
    /// gap proxy r^2 + s^2
    pub gap_proxy: f64,
}

/// Upper end of the admissible y1 range: the value with s = 3/2.
pub fn y1_upper_limit() -> f64 {
    1.5 / (1.5 * PI).tanh()
}

/// Solve theta = tan(theta) on (pi, 3pi/2) by bracketing bisection followed
/// by a Newton polish.
pub fn solve_theta() -> ThetaConstant {
    let f = |t: f64| t.tan() - t;
    let mut theta = bisect(f, PI + 1e-9, 1.5 * PI - 1e-9, 1e-13, 300).expect("theta bracket");
    for _ in 0..4 {
        let tan = theta.tan();
        let fp = tan * tan; // d/dt (tan t - t) = tan^2 t
        if fp != 0.0 {
            theta -= (tan - theta) / fp;
        }
    }
    ThetaConstant { theta, limit_gap: (theta / PI) * (theta / PI) }
}

/// Solve the reduced pair of equations at y1 > 0.
///
/// r is taken on the branch containing r = 1, where it is unique; for
/// y1 >= 1/pi, s is the unique positive root (s < y1 since tanh < 1), and at
/// y1 = 1/pi the positive root degenerates to s = 0.
pub fn solve_reduced(y1: f64) -> Result<ReducedSolution> {
    if !(y1 > 0.0) {
        return Err(Error::InvalidInput(format!("y1 = {y1} must be positive")));
    }
    // tan(pi r) - r/y1 is negative at r = 1 and +inf at r -> 3/2
    let f_r = |r: f64| (PI * r).tan() - r / y1;
    let r = brent(f_r, 1.0 + 1e-12, 1.5 - 1e-9, 1e-14, 200)?;

    let inv_pi = 1.0 / PI;
    let (s, s_missing) = if y1 < inv_pi {
        (0.0, true)
    } else if y1 == inv_pi {
        (0.0, false)
    } else {
        let f_s = |s: f64| (PI * s).tanh() - s / y1;
        // positive near 0 (slope pi - 1/y1 > 0), negative at s = y1 + 1
        let s = brent(f_s, 1e-12, y1 + 1.0, 1e-15, 200)?;
        (s, false)
    };
    let eta = y1 * (y1 - inv_pi);
    Ok(ReducedSolution { y1, r, s, s_missing, eta, gap_proxy: r * r + s * s })
}

/// d(r^2 + s^2)/dy1 in the closed form obtained by differentiating the two
/// reduced equations: (2/pi)(s^2/(s^2 - eta) - r^2/(r^2 + eta)).
pub fn gap_proxy_derivative(sol: &ReducedSolution) -> f64 {
    (2.0 / PI) * (sol.s * sol.s / (sol.s * sol.s - sol.eta) - sol.r * sol.r / (sol.r * sol.r + sol.eta))
}

/// Minimize the gap proxy over the admissible range [1/pi, y1_upper_limit()].
///
/// The interior has no critical point (the closed-form derivative vanishes
/// only when eta = 0), so the minimum falls on the boundary; golden-section
/// search over the interval with both endpoints as explicit candidates
/// returns it without assuming that in advance.
pub fn minimize_gap_proxy() -> Result<(f64, f64)> {
    let lo = 1.0 / PI;
    let hi = y1_upper_limit();
    let objective = |y1: f64| solve_reduced(y1).map(|s| s.gap_proxy).unwrap_or(f64::INFINITY);
    let (y1_star, gap_star) = golden_min(objective, lo, hi, 1e-12, 400);
    Ok((y1_star, gap_star))
}

/// Two-term expansion of the gap-minimizing step location:
/// pi/(2 sqrt(M)) + 1/(pi M).
pub fn x_minus_expansion(m: f64) -> f64 {
    PI / (2.0 * m.sqrt()) + 1.0 / (PI * m)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_value_and_residual() {
        let t = solve_theta();
        // independent oracle: bisection of tan(t) - t on (pi, 3pi/2) at high
        // iteration count, frozen here
        assert!((t.theta - 4.493_409_457_909_064).abs() < 1e-11, "theta = {}", t.theta);
        assert!((t.theta.tan() - t.theta).abs() < 1e-12);
        assert!((t.limit_gap - 2.04575).abs() < 5e-6, "limit gap {}", t.limit_gap);
    }

    #[test]
    fn reduced_solution_at_lower_endpoint() {
        let sol = solve_reduced(1.0 / PI).unwrap();
        let t = solve_theta();
        assert_eq!(sol.s, 0.0);
        assert!(!sol.s_missing);
        assert!((sol.r - t.theta / PI).abs() < 1e-12, "r = {}", sol.r);
        assert!((sol.gap_proxy - t.limit_gap).abs() < 1e-12);
        assert!(sol.eta.abs() < 1e-16);
    }

    #[test]
    fn reduced_solution_at_upper_endpoint() {
        let sol = solve_reduced(y1_upper_limit()).unwrap();
        assert!((sol.s - 1.5).abs() < 1e-12, "s = {}", sol.s);
        assert!(sol.gap_proxy > 3.0);
    }

    #[test]
    fn no_positive_s_root_below_one_over_pi() {
        let sol = solve_reduced(0.25).unwrap();
        assert!(sol.s_missing);
        assert_eq!(sol.s, 0.0);
    }

    #[test]
    fn r_branch_endpoint_behavior() {
        // dr/dy1 = -r/(pi (r^2 + eta)) < 0: the root decreases with y1 and
        // approaches the asymptote at 3/2 from below as y1 -> 0+
        let r_tiny = solve_reduced(1e-4).unwrap().r;
        assert!(r_tiny < 1.5 && 1.5 - r_tiny < 1e-3, "r(1e-4) = {r_tiny}");
        let mut prev = r_tiny;
        for &y1 in &[0.1, 0.3, 1.0, 5.0, 50.0] {
            let r = solve_reduced(y1).unwrap().r;
            assert!(r < prev, "r not decreasing at y1 = {y1}");
            prev = r;
        }
        // and it flattens onto r = 1 for large y1
        assert!((solve_reduced(50.0).unwrap().r - 1.0) < 0.01);
    }

    #[test]
    fn residuals_of_reduced_equations() {
        for &y1 in &[0.35, 0.5, 0.9, 1.2, y1_upper_limit()] {
            let sol = solve_reduced(y1).unwrap();
            let res_r = (PI * sol.r).tan() - sol.r / y1;
            assert!(res_r.abs() < 1e-12, "r residual {res_r} at y1 = {y1}");
            if sol.s > 0.0 {
                let res_s = (PI * sol.s).tanh() - sol.s / y1;
                assert!(res_s.abs() < 1e-12, "s residual {res_s} at y1 = {y1}");
            }
        }
    }

    #[test]
    fn derivative_identity_by_finite_differences() {
        let h = 1e-6;
        for i in 0..20 {
            let y1 = 1.0 / PI + (0.05 + 0.045 * i as f64);
            let sol = solve_reduced(y1).unwrap();
            let fd = (solve_reduced(y1 + h).unwrap().gap_proxy
                - solve_reduced(y1 - h).unwrap().gap_proxy)
                / (2.0 * h);
            let closed = gap_proxy_derivative(&sol);
            assert!(
                (fd - closed).abs() < 1e-6 * (1.0 + closed.abs()),
                "y1 = {y1}: fd {fd} vs closed {closed}"
            );
        }
    }

    #[test]
    fn critical_point_requires_eta_zero() {
        // the closed-form derivative is strictly positive on the interior
        for i in 1..40 {
            let y1 = 1.0 / PI + i as f64 * (y1_upper_limit() - 1.0 / PI) / 40.0;
            let sol = solve_reduced(y1).unwrap();
            assert!(sol.eta > 0.0);
            assert!(sol.s * sol.s > sol.eta, "s^2 > eta fails at y1 = {y1}");
            assert!(gap_proxy_derivative(&sol) > 0.0, "derivative not positive at y1 = {y1}");
        }
        // and eta vanishes exactly at the left endpoint
        assert!(solve_reduced(1.0 / PI).unwrap().eta.abs() < 1e-16);
    }

    #[test]
    fn proxy_minimum_at_left_endpoint() {
        let (y1_star, gap_star) = minimize_gap_proxy().unwrap();
        let t = solve_theta();
        assert!((y1_star - 1.0 / PI).abs() < 1e-8, "y1* = {y1_star}");
        assert!((gap_star - t.limit_gap).abs() < 1e-10, "gap* = {gap_star}");
    }

    #[test]
    fn expansion_arithmetic() {
        let v = x_minus_expansion(1e6);
        assert!((v - (PI / 2000.0 + 1.0 / (PI * 1e6))).abs() < 1e-15);
        assert!((v - 0.00157112).abs() < 1e-7);
    }
}
