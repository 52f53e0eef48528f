//! Poisson and Helmholtz-type solves for `Δ_g` on a conformal sphere.
//!
//! Both equations are multiplied through by `e^{2ρ}` and posed in harmonic
//! space: `Δ_g v = b` becomes the diagonal system `l(l+1) v_lm = (e^{2ρ} b)_lm`,
//! and `Δ_g v + a v = b` becomes `(K + M_c) v = Π(e^{2ρ} b)` with `c = a e^{2ρ}`,
//! `K = diag(l(l+1))` and `M_c` the quadrature Galerkin mass matrix of `c`.
//! `K + M_c` is symmetric positive definite when `a ≥ 0` has positive
//! integral, so it is solved by preconditioned conjugate gradients.

use std::f64::consts::PI;

use serde::Serialize;

use super::grid::SphereGrid;
use super::metric::{round_laplacian, GridFunction, SurfaceMetric};
use crate::error::{Error, Result};

/// Solution of a linear solve together with its certificate.
#[derive(Clone, Debug, Serialize)]
pub struct LinearSolution {
    #[serde(skip)]
    pub solution: GridFunction,
    #[serde(skip)]
    pub coeffs: Vec<f64>,
    /// Projected `L²_g` residual relative to `max(‖b‖_{L²}, ε_machine)`.
    pub residual: f64,
    pub iterations: usize,
}

const CG_RELATIVE_TOL: f64 = 1e-12;

/// Unique `g`-mean-zero `v` with `Δ_g v = b`.
pub fn solve_poisson(b: &GridFunction, m: &SurfaceMetric) -> Result<LinearSolution> {
    m.check(b.len())?;
    let b_norm = m.l2_norm(b)?;
    let mean = m.integrate(b)?;
    if mean.abs() > 1e-9 * b_norm * m.area().sqrt() {
        return Err(Error::Precondition(format!(
            "Poisson right-hand side has nonzero mean: ∫b dA = {mean:.3e} (‖b‖ = {b_norm:.3e})"
        )));
    }
    let grid = m.grid();
    let weighted: Vec<f64> = b
        .values()
        .iter()
        .zip(m.conformal())
        .map(|(v, c)| v * c)
        .collect();
    let rhs = grid.analyze(&weighted);
    let mut coeffs = invert_round_laplacian(&rhs);
    zero_mean(m, &mut coeffs);
    let mut residual = round_laplacian(&coeffs);
    for (r, f) in residual.iter_mut().zip(&rhs) {
        *r -= f;
    }
    Ok(LinearSolution {
        solution: GridFunction::from_coeffs(grid, &coeffs),
        residual: m.residual_norm_of_coeffs(&residual) / b_norm.max(f64::EPSILON),
        coeffs,
        iterations: 0,
    })
}

/// `v` with `Δ_g v + a v = b`, for pointwise nonnegative `a` with `∫a > 0`.
pub fn solve_helmholtz(
    a: &GridFunction,
    b: &GridFunction,
    m: &SurfaceMetric,
) -> Result<LinearSolution> {
    m.check(a.len())?;
    m.check(b.len())?;
    let c = weighted_potential(a, m)?;
    let weighted: Vec<f64> = b
        .values()
        .iter()
        .zip(m.conformal())
        .map(|(v, c)| v * c)
        .collect();
    let rhs = m.grid().analyze(&weighted);
    let b_norm = m.l2_norm(b)?;
    let (coeffs, iterations, abs_residual) = helmholtz_galerkin(m, &c, &rhs)?;
    Ok(LinearSolution {
        solution: GridFunction::from_coeffs(m.grid(), &coeffs),
        coeffs,
        residual: abs_residual / b_norm.max(f64::EPSILON),
        iterations,
    })
}

/// Validates `a` and returns `c = a e^{2ρ}` at the nodes.
pub(crate) fn weighted_potential(a: &GridFunction, m: &SurfaceMetric) -> Result<Vec<f64>> {
    if let Some((i, v)) = a.values().iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::Precondition(format!(
            "Helmholtz potential must be nonnegative, found a = {v:.3e} at node {i}"
        )));
    }
    if m.integrate(a)? <= 0.0 {
        return Err(Error::Precondition(
            "Helmholtz potential must have positive integral".into(),
        ));
    }
    Ok(a.values()
        .iter()
        .zip(m.conformal())
        .map(|(a, c)| a * c)
        .collect())
}

/// Preconditioned CG for `(K + M_c) x = rhs` in coefficient space. Returns
/// the solution, the iteration count and the absolute projected residual.
pub(crate) fn helmholtz_galerkin(
    m: &SurfaceMetric,
    c: &[f64],
    rhs: &[f64],
) -> Result<(Vec<f64>, usize, f64)> {
    let grid = m.grid();
    let n = grid.coeff_count();
    let mean_c = c
        .iter()
        .zip(grid.weights())
        .map(|(a, w)| a * w)
        .sum::<f64>()
        / (4.0 * PI);
    let precond: Vec<f64> = (0..n)
        .map(|i| {
            let (l, _) = SphereGrid::degree_order(i);
            1.0 / ((l * (l + 1)) as f64 + mean_c)
        })
        .collect();
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut values = grid.synthesize(x);
        for (v, ci) in values.iter_mut().zip(c) {
            *v *= ci;
        }
        let mut out = grid.analyze(&values);
        for (i, o) in out.iter_mut().enumerate() {
            let (l, _) = SphereGrid::degree_order(i);
            *o += (l * (l + 1)) as f64 * x[i];
        }
        out
    };

    let rhs_norm = norm(rhs);
    let mut x = vec![0.0; n];
    if rhs_norm == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let tol = CG_RELATIVE_TOL * rhs_norm;
    let max_iter = 10 * grid.l_max().max(5);
    let mut r = rhs.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&precond).map(|(a, p)| a * p).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut iterations = 0;
    while norm(&r) > tol {
        if iterations >= max_iter {
            let true_res = true_residual(&apply, &x, rhs);
            return Err(Error::Convergence {
                what: "Helmholtz conjugate gradient",
                iterations,
                residual: m.residual_norm_of_coeffs(&true_res),
            });
        }
        let ap = apply(&p);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * precond[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
    let true_res = true_residual(&apply, &x, rhs);
    Ok((x, iterations, m.residual_norm_of_coeffs(&true_res)))
}

fn true_residual(apply: &impl Fn(&[f64]) -> Vec<f64>, x: &[f64], rhs: &[f64]) -> Vec<f64> {
    let mut r = apply(x);
    for (a, b) in r.iter_mut().zip(rhs) {
        *a -= b;
    }
    r
}

pub(crate) fn invert_round_laplacian(rhs: &[f64]) -> Vec<f64> {
    rhs.iter()
        .enumerate()
        .map(|(i, f)| {
            let (l, _) = SphereGrid::degree_order(i);
            if l == 0 {
                0.0
            } else {
                f / (l * (l + 1)) as f64
            }
        })
        .collect()
}

/// Shifts the `Y_00` coefficient so that `∫ v dA_g = 0`.
pub(crate) fn zero_mean(m: &SurfaceMetric, coeffs: &mut [f64]) {
    let values = m.grid().synthesize(coeffs);
    let mean = m.integrate_slice(&values) / m.area();
    coeffs[0] -= mean * (4.0 * PI).sqrt();
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
