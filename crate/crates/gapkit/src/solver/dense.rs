//! Independent dense verification oracle: symmetric three-point flux-form
//! finite differences on a breakpoint-aligned piecewise-uniform mesh, with
//! Sturm-sequence bisection for eigenvalues and inverse iteration for
//! eigenvectors.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::potential::{BoundaryConditions, CoefficientP, Potential};

use super::{count_sign_changes, trapezoid, EigenSolution};

struct Mesh {
    /// node coordinates 0 = x_0 < ... < x_N = pi
    xs: Vec<f64>,
}

/// Panels per merged coefficient segment, proportional to length. Multiplying
/// `factor` by 2 refines every panel exactly in half, which keeps the h^2
/// error expansion clean for extrapolation.
fn build_mesh(p: &CoefficientP, v: &Potential, base: usize, factor: usize) -> Mesh {
    let mut bps = v.total_breakpoints();
    for &x in &p.xs {
        if x > 0.0 && x < PI {
            if let Err(i) = bps.binary_search_by(|b| b.partial_cmp(&x).unwrap()) {
                if (bps[i] - x).abs() > 1e-14 && (x - bps[i - 1]).abs() > 1e-14 {
                    bps.insert(i, x);
                }
            }
        }
    }
    let mut xs = vec![0.0];
    for w in bps.windows(2) {
        let len = w[1] - w[0];
        let n = ((len * base as f64 / PI).ceil() as usize).max(1) * factor;
        for j in 1..=n {
            xs.push(w[0] + len * j as f64 / n as f64);
        }
        *xs.last_mut().unwrap() = w[1];
    }
    Mesh { xs }
}

struct Tridiag {
    /// symmetrized diagonal
    c: Vec<f64>,
    /// symmetrized off-diagonal
    e: Vec<f64>,
    /// lumped masses for the back-transform
    d: Vec<f64>,
    /// node coordinates of the unknowns
    xs: Vec<f64>,
    /// true when the left resp. right endpoint node was eliminated (Dirichlet)
    drop_left: bool,
    drop_right: bool,
}

fn assemble(p: &CoefficientP, v: &Potential, bc: BoundaryConditions, mesh: &Mesh) -> Result<Tridiag> {
    let xs = &mesh.xs;
    let np = xs.len() - 1; // panels
    let drop_left = bc.alpha == 0.0;
    let drop_right = bc.beta == 0.0;

    // per-panel data: midpoint p, left-closed and left-limit V values
    let mut pm = Vec::with_capacity(np);
    let mut vl = Vec::with_capacity(np);
    let mut vr = Vec::with_capacity(np);
    let mut h = Vec::with_capacity(np);
    for i in 0..np {
        let (a, b) = (xs[i], xs[i + 1]);
        h.push(b - a);
        pm.push(p.eval(0.5 * (a + b)));
        vl.push(v.evaluate(a)?);
        vr.push(v.eval_total_left_limit(b)?);
    }

    let lo = if drop_left { 1 } else { 0 };
    let hi = if drop_right { np - 1 } else { np };
    if hi < lo + 2 {
        return Err(Error::GridTooCoarse { grid: np, requested: 1 });
    }
    let n_unknowns = hi - lo + 1;
    let mut a_diag = vec![0.0; n_unknowns];
    let mut b_off = vec![0.0; n_unknowns - 1];
    let mut d_mass = vec![0.0; n_unknowns];
    let mut node_xs = vec![0.0; n_unknowns];

    for (row, node) in (lo..=hi).enumerate() {
        node_xs[row] = xs[node];
        let mut a = 0.0;
        let mut d = 0.0;
        if node > 0 {
            // left half-panel contribution: exact integral of linear V
            a += pm[node - 1] / h[node - 1] + (h[node - 1] / 2.0) * (vl[node - 1] + 3.0 * vr[node - 1]) / 4.0;
            d += h[node - 1] / 2.0;
        }
        if node < np {
            a += pm[node] / h[node] + (h[node] / 2.0) * (3.0 * vl[node] + vr[node]) / 4.0;
            d += h[node] / 2.0;
        }
        if node == 0 {
            // u(0) cos a = w(0) sin a with sin a != 0 here
            a += 1.0 / bc.alpha.tan();
        }
        if node == np {
            a -= 1.0 / bc.beta.tan();
        }
        a_diag[row] = a;
        d_mass[row] = d;
        if node < hi {
            b_off[row] = -pm[node] / h[node];
        }
    }

    let c: Vec<f64> = a_diag.iter().zip(d_mass.iter()).map(|(a, d)| a / d).collect();
    let e: Vec<f64> = (0..n_unknowns - 1)
        .map(|i| b_off[i] / (d_mass[i] * d_mass[i + 1]).sqrt())
        .collect();
    Ok(Tridiag { c, e, d: d_mass, xs: node_xs, drop_left, drop_right })
}

/// Number of eigenvalues of the symmetric tridiagonal matrix below x.
fn sturm_count(t: &Tridiag, x: f64) -> usize {
    let mut count = 0;
    let mut q = t.c[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..t.c.len() {
        let e2 = t.e[i - 1] * t.e[i - 1];
        let denom = if q == 0.0 { 1e-300 } else { q };
        q = (t.c[i] - x) - e2 / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

fn eigenvalue_bisect(t: &Tridiag, j: usize) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let n = t.c.len();
    for i in 0..n {
        let r = (if i > 0 { t.e[i - 1].abs() } else { 0.0 }) + (if i < n - 1 { t.e[i].abs() } else { 0.0 });
        lo = lo.min(t.c[i] - r);
        hi = hi.max(t.c[i] + r);
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if sturm_count(t, mid) > j {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-14 * (1.0 + lo.abs().max(hi.abs())) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Solve (T - shift I) y = rhs in place; tridiagonal LU with partial pivoting.
fn tridiag_shifted_solve(t: &Tridiag, shift: f64, rhs: &mut [f64]) {
    let n = t.c.len();
    let mut d: Vec<f64> = t.c.iter().map(|&c| c - shift).collect();
    let mut du: Vec<f64> = t.e.clone();
    let mut du2 = vec![0.0; n];
    let dl: Vec<f64> = t.e.clone();
    // forward elimination with row swaps
    for i in 0..n - 1 {
        if d[i].abs() >= dl[i].abs() {
            let piv = if d[i] != 0.0 { dl[i] / d[i] } else { 0.0 };
            d[i + 1] -= piv * du[i];
            rhs[i + 1] -= piv * rhs[i];
            du2[i] = 0.0;
        } else {
            let piv = d[i] / dl[i];
            d[i] = dl[i];
            let tmp = d[i + 1];
            d[i + 1] = du[i] - piv * tmp;
            du2[i] = if i + 1 < n - 1 { du[i + 1] } else { 0.0 };
            if i + 1 < n - 1 {
                du[i + 1] = -piv * du2[i];
            }
            du[i] = tmp;
            rhs.swap(i, i + 1);
            rhs[i + 1] -= piv * rhs[i];
        }
    }
    // back substitution
    if d[n - 1] == 0.0 {
        d[n - 1] = 1e-300;
    }
    rhs[n - 1] /= d[n - 1];
    if n >= 2 {
        let i = n - 2;
        if d[i] == 0.0 {
            d[i] = 1e-300;
        }
        rhs[i] = (rhs[i] - du[i] * rhs[i + 1]) / d[i];
    }
    for i in (0..n.saturating_sub(2)).rev() {
        if d[i] == 0.0 {
            d[i] = 1e-300;
        }
        rhs[i] = (rhs[i] - du[i] * rhs[i + 1] - du2[i] * rhs[i + 2]) / d[i];
    }
}

fn inverse_iteration(t: &Tridiag, lambda: f64, prior: &[Vec<f64>]) -> Vec<f64> {
    let n = t.c.len();
    let mut y: Vec<f64> = (0..n).map(|i| (0.712_3 * (i as f64 + 1.0)).sin() + 0.25).collect();
    let shift = lambda + 1e-11 * (1.0 + lambda.abs());
    for _ in 0..4 {
        for prev in prior {
            let dot: f64 = y.iter().zip(prev.iter()).map(|(a, b)| a * b).sum();
            for (yi, pi) in y.iter_mut().zip(prev.iter()) {
                *yi -= dot * pi;
            }
        }
        tridiag_shifted_solve(t, shift, &mut y);
        let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in y.iter_mut() {
            *v /= norm;
        }
    }
    for prev in prior {
        let dot: f64 = y.iter().zip(prev.iter()).map(|(a, b)| a * b).sum();
        for (yi, pi) in y.iter_mut().zip(prev.iter()) {
            *yi -= dot * pi;
        }
    }
    let norm: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in y.iter_mut() {
        *v /= norm;
    }
    y
}

fn validate(grid_size: usize, k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidInput("k must be at least 1".into()));
    }
    if grid_size < 64 {
        return Err(Error::GridTooCoarse { grid: grid_size, requested: k });
    }
    Ok(())
}

/// Eigenvalues only; cheaper than `dense_oracle` when vectors are not needed.
pub fn dense_oracle_eigenvalues(
    p: &CoefficientP,
    v: &Potential,
    bc: BoundaryConditions,
    k: usize,
    grid_size: usize,
) -> Result<Vec<f64>> {
    validate(grid_size, k)?;
    let mesh = build_mesh(p, v, grid_size, 1);
    let t = assemble(p, v, bc, &mesh)?;
    if t.c.len() < 8 * k {
        return Err(Error::GridTooCoarse { grid: grid_size, requested: k });
    }
    Ok((0..k).map(|j| eigenvalue_bisect(&t, j)).collect())
}

/// Two-grid h^2 extrapolation of the oracle eigenvalues: meshes at `factor`
/// 1 and 2 of the same base mesh are nested, so (4 l_2 - l_1) / 3 removes the
/// leading error term.
pub fn dense_oracle_richardson(
    p: &CoefficientP,
    v: &Potential,
    bc: BoundaryConditions,
    k: usize,
    base_grid: usize,
) -> Result<Vec<f64>> {
    validate(base_grid, k)?;
    let coarse = {
        let mesh = build_mesh(p, v, base_grid, 1);
        let t = assemble(p, v, bc, &mesh)?;
        if t.c.len() < 8 * k {
            return Err(Error::GridTooCoarse { grid: base_grid, requested: k });
        }
        (0..k).map(|j| eigenvalue_bisect(&t, j)).collect::<Vec<f64>>()
    };
    let fine = {
        let mesh = build_mesh(p, v, base_grid, 2);
        let t = assemble(p, v, bc, &mesh)?;
        (0..k).map(|j| eigenvalue_bisect(&t, j)).collect::<Vec<f64>>()
    };
    Ok(fine.iter().zip(coarse.iter()).map(|(f, c)| (4.0 * f - c) / 3.0).collect())
}

/// Eigenpairs of the flux-form finite-difference discretization.
pub fn dense_oracle(
    p: &CoefficientP,
    v: &Potential,
    bc: BoundaryConditions,
    k: usize,
    grid_size: usize,
) -> Result<Vec<EigenSolution>> {
    validate(grid_size, k)?;
    let mesh = build_mesh(p, v, grid_size, 1);
    let t = assemble(p, v, bc, &mesh)?;
    if t.c.len() < 8 * k {
        return Err(Error::GridTooCoarse { grid: grid_size, requested: k });
    }
    let lambdas: Vec<f64> = (0..k).map(|j| eigenvalue_bisect(&t, j)).collect();
    let mut out: Vec<EigenSolution> = Vec::with_capacity(k);
    let mut vectors: Vec<Vec<f64>> = Vec::new();
    for (j, &lambda) in lambdas.iter().enumerate() {
        let clustered: Vec<Vec<f64>> = lambdas[..j]
            .iter()
            .zip(vectors.iter())
            .filter(|(l, _)| (*l - lambda).abs() < 1e-6 * (1.0 + lambda.abs()))
            .map(|(_, v)| v.clone())
            .collect();
        let y = inverse_iteration(&t, lambda, &clustered);
        vectors.push(y.clone());

        // back-transform, embed Dirichlet endpoints, normalize
        let mut xs = Vec::with_capacity(t.xs.len() + 2);
        let mut us = Vec::with_capacity(t.xs.len() + 2);
        if t.drop_left {
            xs.push(0.0);
            us.push(0.0);
        }
        for (i, &x) in t.xs.iter().enumerate() {
            xs.push(x);
            us.push(y[i] / t.d[i].sqrt());
        }
        if t.drop_right {
            xs.push(PI);
            us.push(0.0);
        }
        let sq: Vec<f64> = us.iter().map(|u| u * u).collect();
        let norm = trapezoid(&xs, &sq).sqrt();
        for u in us.iter_mut() {
            *u /= norm;
        }
        let sup = us.iter().fold(0.0f64, |m, u| m.max(u.abs()));
        if let Some(first) = us.iter().find(|u| u.abs() > 1e-9 * sup) {
            if *first < 0.0 {
                for u in us.iter_mut() {
                    *u = -*u;
                }
            }
        }
        // w = p u' by the second-order nonuniform three-point formula
        let n = xs.len();
        let mut ws = vec![0.0; n];
        for i in 1..n - 1 {
            let hl = xs[i] - xs[i - 1];
            let hr = xs[i + 1] - xs[i];
            let du = (hl * hl * us[i + 1] - hr * hr * us[i - 1] - (hl * hl - hr * hr) * us[i])
                / (hl * hr * (hl + hr));
            ws[i] = p.eval(xs[i]) * du;
        }
        ws[0] = p.eval(0.0) * (us[1] - us[0]) / (xs[1] - xs[0]);
        ws[n - 1] = p.eval(PI) * (us[n - 1] - us[n - 2]) / (xs[n - 1] - xs[n - 2]);

        let sign_changes = count_sign_changes(&us, 1e-8 * sup);
        out.push(EigenSolution {
            index: j + 1,
            lambda,
            xs,
            us,
            ws,
            sign_changes,
            sup_norm: sup,
        });
    }
    Ok(out)
}
