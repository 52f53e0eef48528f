//! Laplace–Beltrami spectra of conformal sphere metrics.
//!
//! The discrete problem is the generalised eigenproblem `K x = λ M x` on the
//! band-limited space, `K = diag(l(l+1))`, `M` the Galerkin mass matrix of
//! `e^{2ρ}`. Interchangeable solvers are registered by name and picked at
//! run time (configuration key `eigensolver`).

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::sphere::{dot, invert_round_laplacian, SphereGrid, SurfaceMetric};

pub const DEFAULT_SOLVER: &str = "subspace";

pub trait EigenSolver: Send + Sync {
    fn name(&self) -> &'static str;

    /// The `count` smallest eigenvalues of `Δ_g` in nondecreasing order,
    /// starting with the zero mode.
    fn lowest(&self, metric: &SurfaceMetric, count: usize) -> Result<Vec<f64>>;
}

/// Full assembly of `M` followed by a dense symmetric solve. Exact on the
/// band-limited space but cubic in `(l_max + 1)²`.
#[derive(Debug, Clone, Copy)]
pub struct DenseEigen {
    pub max_dimension: usize,
}

/// Block inverse iteration with Rayleigh–Ritz on `g`-mean-zero functions.
/// Each step costs one Poisson solve (diagonal) and one mass application per
/// block vector.
#[derive(Debug, Clone, Copy)]
pub struct SubspaceIteration {
    pub max_iterations: usize,
    pub tolerance: f64,
}

static DENSE: DenseEigen = DenseEigen {
    max_dimension: 2500,
};
static SUBSPACE: SubspaceIteration = SubspaceIteration {
    max_iterations: 600,
    tolerance: 1e-13,
};
static REGISTRY: [&dyn EigenSolver; 2] = [&DENSE, &SUBSPACE];

/// Looks up a registered solver by name.
pub fn solver(name: &str) -> Result<&'static dyn EigenSolver> {
    REGISTRY
        .iter()
        .copied()
        .find(|s| s.name() == name)
        .ok_or_else(|| Error::UnknownStrategy {
            kind: "eigensolver",
            name: name.to_string(),
            available: available().join(", "),
        })
}

pub fn available() -> Vec<&'static str> {
    REGISTRY.iter().map(|s| s.name()).collect()
}

/// Smallest positive eigenvalue of `Δ_g`.
pub fn first_eigenvalue(metric: &SurfaceMetric, solver_name: &str) -> Result<f64> {
    let values = solver(solver_name)?.lowest(metric, 2)?;
    Ok(values[1])
}

fn check_count(metric: &SurfaceMetric, count: usize) -> Result<()> {
    if count == 0 || count > metric.grid().coeff_count() {
        return Err(Error::Precondition(format!(
            "requested {count} eigenvalues from a space of dimension {}",
            metric.grid().coeff_count()
        )));
    }
    Ok(())
}

/// Eigenvalues of the pencil `(A, B)` with `B` positive definite, ascending.
fn pencil_eigen(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let chol = b
        .cholesky()
        .ok_or_else(|| Error::Numeric("mass matrix is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Numeric("singular Cholesky factor".into()))?;
    let mut c = &linv * a * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])]
    });
    // back to the original basis: x = L^{-T} y
    let x = linv.transpose() * vecs;
    Ok((values, x))
}

impl EigenSolver for DenseEigen {
    fn name(&self) -> &'static str {
        "dense"
    }

    fn lowest(&self, metric: &SurfaceMetric, count: usize) -> Result<Vec<f64>> {
        check_count(metric, count)?;
        let grid = metric.grid();
        let n = grid.coeff_count();
        if n > self.max_dimension {
            return Err(Error::Precondition(format!(
                "dense eigensolver limited to dimension {}, got {n}",
                self.max_dimension
            )));
        }
        let nodes = grid.node_count();
        let sqrt_w: Vec<f64> = metric.area_weights().iter().map(|w| w.sqrt()).collect();
        let mut basis = DMatrix::<f64>::zeros(nodes, n);
        let mut unit = vec![0.0; n];
        for i in 0..n {
            unit[i] = 1.0;
            let col = grid.synthesize(&unit);
            unit[i] = 0.0;
            for (r, v) in col.iter().enumerate() {
                basis[(r, i)] = v * sqrt_w[r];
            }
        }
        let mass = basis.transpose() * &basis;
        let stiffness = DMatrix::from_fn(n, n, |r, c| {
            if r == c {
                let (l, _) = SphereGrid::degree_order(r);
                (l * (l + 1)) as f64
            } else {
                0.0
            }
        });
        let (values, _) = pencil_eigen(stiffness, mass)?;
        Ok(values.into_iter().take(count).collect())
    }
}

impl EigenSolver for SubspaceIteration {
    fn name(&self) -> &'static str {
        "subspace"
    }

    fn lowest(&self, metric: &SurfaceMetric, count: usize) -> Result<Vec<f64>> {
        check_count(metric, count)?;
        let n_pos = count - 1;
        if n_pos == 0 {
            return Ok(vec![0.0]);
        }
        let n = metric.grid().coeff_count();
        let block = (n_pos + (n_pos / 2).max(8)).min(n - 1);
        if block < n_pos {
            return Err(Error::Precondition("too many eigenvalues requested".into()));
        }
        let stiff: Vec<f64> = (0..n)
            .map(|i| {
                let (l, _) = SphereGrid::degree_order(i);
                (l * (l + 1)) as f64
            })
            .collect();
        let mut e0 = vec![0.0; n];
        e0[0] = 1.0;
        let m_e0 = metric.mass_apply(&e0);

        // Initial block: the first harmonics above the constant.
        let mut mv: Vec<Vec<f64>> = (0..block)
            .map(|k| {
                let mut c = vec![0.0; n];
                c[k + 1] = 1.0;
                metric.mass_apply(&c)
            })
            .collect();
        let mut previous = vec![f64::INFINITY; n_pos];
        let mut change = f64::INFINITY;

        for _ in 0..self.max_iterations {
            let mut w = Vec::with_capacity(block);
            let mut mw = Vec::with_capacity(block);
            for mvi in &mv {
                let mut wi = invert_round_laplacian(mvi);
                let mut mwi = metric.mass_apply(&wi);
                let shift = mwi[0] / m_e0[0];
                wi[0] -= shift;
                for (a, b) in mwi.iter_mut().zip(&m_e0) {
                    *a -= shift * b;
                }
                w.push(wi);
                mw.push(mwi);
            }
            let kp = DMatrix::from_fn(block, block, |r, c| {
                w[r].iter()
                    .zip(&w[c])
                    .zip(&stiff)
                    .map(|((a, b), k)| a * b * k)
                    .sum()
            });
            let mp = DMatrix::from_fn(block, block, |r, c| {
                0.5 * (dot(&w[r], &mw[c]) + dot(&w[c], &mw[r]))
            });
            let (ritz, vecs) = pencil_eigen(kp, mp)?;
            mv = (0..block)
                .map(|k| combine(&mw, vecs.column(k).as_slice()))
                .collect();
            change = ritz
                .iter()
                .zip(&previous)
                .take(n_pos)
                .map(|(a, b)| ((a - b) / a).abs())
                .fold(0.0, f64::max);
            previous = ritz[..n_pos].to_vec();
            if change < self.tolerance {
                let mut out = vec![0.0];
                out.extend(previous);
                return Ok(out);
            }
        }
        Err(Error::Convergence {
            what: "subspace eigen-iteration",
            iterations: self.max_iterations,
            residual: change,
        })
    }
}

fn combine(vectors: &[Vec<f64>], weights: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; vectors[0].len()];
    for (v, w) in vectors.iter().zip(weights) {
        for (o, x) in out.iter_mut().zip(v) {
            *o += w * x;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::RhoTerm;
    use std::sync::Arc;

    fn grid(l: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(l).unwrap())
    }

    #[test]
    fn round_sphere_spectrum() {
        let m = SurfaceMetric::round(grid(11));
        for name in available() {
            let vals = solver(name).unwrap().lowest(&m, 9).unwrap();
            let expected = [0.0, 2.0, 2.0, 2.0, 6.0, 6.0, 6.0, 6.0, 6.0];
            for (v, e) in vals.iter().zip(expected) {
                assert!((v - e).abs() < 1e-9, "{name}: {vals:?}");
            }
        }
        assert!((m.lambda1().unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn constant_rho_rescales() {
        let g = grid(11);
        let c = 0.3;
        let y00 = c * (4.0 * std::f64::consts::PI).sqrt();
        let m = SurfaceMetric::from_rho_terms(g, &[RhoTerm::from((0, 0, y00))]).unwrap();
        let l1 = first_eigenvalue(&m, "subspace").unwrap();
        assert!((l1 - 2.0 * (-2.0 * c).exp()).abs() < 1e-10);
    }

    #[test]
    fn solvers_agree_on_bumped_metric() {
        let m = SurfaceMetric::from_rho_terms(
            grid(15),
            &[RhoTerm::from((2, 0, 0.2)), RhoTerm::from((1, 1, -0.1))],
        )
        .unwrap();
        let dense = solver("dense").unwrap().lowest(&m, 12).unwrap();
        let sub = solver("subspace").unwrap().lowest(&m, 12).unwrap();
        assert!(dense[0].abs() < 1e-9);
        for (a, b) in dense.iter().zip(&sub).skip(1) {
            assert!((a - b).abs() < 1e-9 * a, "{dense:?} vs {sub:?}");
        }
    }

    #[test]
    fn unknown_solver_is_reported() {
        let err = solver("lanczos").err().unwrap();
        assert!(err.to_string().contains("dense"));
    }
}
