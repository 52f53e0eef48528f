use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{real_harmonic, SphereGrid};
use crate::eigen;
use crate::error::{Error, Result};

/// Scalar samples at every node of a [`SphereGrid`], row-major in `(theta, phi)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridFunction<T = f64> {
    values: Vec<T>,
}

impl<T: Copy> GridFunction<T> {
    pub fn new(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn constant(grid: &SphereGrid, value: T) -> Self {
        Self {
            values: vec![value; grid.node_count()],
        }
    }

    pub fn from_fn(grid: &SphereGrid, mut f: impl FnMut(f64, f64) -> T) -> Self {
        Self {
            values: grid.nodes().map(|(t, p)| f(t, p)).collect(),
        }
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> GridFunction<U> {
        GridFunction {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map<S: Copy, U: Copy>(
        &self,
        other: &GridFunction<S>,
        f: impl Fn(T, S) -> U,
    ) -> GridFunction<U> {
        GridFunction {
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }
}

impl GridFunction<f64> {
    /// A single real harmonic sampled on the grid.
    pub fn harmonic(grid: &SphereGrid, l: usize, m: i64) -> Self {
        Self::from_fn(grid, |t, p| real_harmonic(l, m, t, p))
    }

    /// Band-limited function from a coefficient vector.
    pub fn from_coeffs(grid: &SphereGrid, coeffs: &[f64]) -> Self {
        Self::new(grid.synthesize(coeffs))
    }

    pub fn scaled(&self, s: f64) -> Self {
        self.map(|v| v * s)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// One `(l, m, value)` term of the band-limited conformal exponent ρ.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(usize, i64, f64)", into = "(usize, i64, f64)")]
pub struct RhoTerm {
    pub l: usize,
    pub m: i64,
    pub value: f64,
}

impl From<(usize, i64, f64)> for RhoTerm {
    fn from((l, m, value): (usize, i64, f64)) -> Self {
        Self { l, m, value }
    }
}

impl From<RhoTerm> for (usize, i64, f64) {
    fn from(t: RhoTerm) -> Self {
        (t.l, t.m, t.value)
    }
}

/// `L²`, `H¹` and sup norms of a grid function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Norms {
    pub l2: f64,
    pub h1: f64,
    pub c0: f64,
}

/// The metric `e^{2ρ} g_round` on the two-sphere, discretised on a grid.
///
/// All integrals are `∫ f dA_g = Σ f e^{2ρ} w` over the nodes. The first
/// nonzero Laplace eigenvalue is computed lazily on first request.
#[derive(Debug)]
pub struct SurfaceMetric {
    grid: Arc<SphereGrid>,
    rho_terms: Vec<RhoTerm>,
    rho: GridFunction,
    conformal: Vec<f64>,
    area: f64,
    lambda1: OnceLock<Result<f64>>,
}

impl SurfaceMetric {
    pub fn round(grid: Arc<SphereGrid>) -> Self {
        let n = grid.node_count();
        Self::assemble(grid, Vec::new(), GridFunction::new(vec![0.0; n]))
    }

    /// Metric whose conformal exponent is `ρ = Σ value·Y_{l,m}`.
    pub fn from_rho_terms(grid: Arc<SphereGrid>, terms: &[RhoTerm]) -> Result<Self> {
        let mut coeffs = vec![0.0; grid.coeff_count()];
        for t in terms {
            if t.l > grid.l_max() || t.m.unsigned_abs() as usize > t.l {
                return Err(Error::Precondition(format!(
                    "rho term (l={}, m={}) is outside the band l <= {}",
                    t.l,
                    t.m,
                    grid.l_max()
                )));
            }
            if !t.value.is_finite() {
                return Err(Error::Precondition("rho coefficient is not finite".into()));
            }
            coeffs[SphereGrid::index(t.l, t.m)] += t.value;
        }
        let rho = GridFunction::new(grid.synthesize(&coeffs));
        Ok(Self::assemble(grid, terms.to_vec(), rho))
    }

    /// Metric given directly by the positive factor `e^{2ρ}` at each node.
    pub fn from_conformal_factor(grid: Arc<SphereGrid>, factor: &[f64]) -> Result<Self> {
        check_len(&grid, factor.len())?;
        if let Some(bad) = factor.iter().find(|v| !(**v > 0.0) || !v.is_finite()) {
            return Err(Error::Precondition(format!(
                "conformal factor must be positive and finite, found {bad}"
            )));
        }
        let rho = GridFunction::new(factor.iter().map(|f| 0.5 * f.ln()).collect());
        Ok(Self::assemble(grid, Vec::new(), rho))
    }

    fn assemble(grid: Arc<SphereGrid>, rho_terms: Vec<RhoTerm>, rho: GridFunction) -> Self {
        let conformal: Vec<f64> = rho.values().iter().map(|r| (2.0 * r).exp()).collect();
        let area = conformal
            .iter()
            .zip(grid.weights())
            .map(|(c, w)| c * w)
            .sum();
        Self {
            grid,
            rho_terms,
            rho,
            conformal,
            area,
            lambda1: OnceLock::new(),
        }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }

    pub fn rho_terms(&self) -> &[RhoTerm] {
        &self.rho_terms
    }

    pub fn rho(&self) -> &GridFunction {
        &self.rho
    }

    /// `e^{2ρ}` at each node.
    pub fn conformal(&self) -> &[f64] {
        &self.conformal
    }

    pub fn area(&self) -> f64 {
        self.area
    }

    pub fn is_round(&self) -> bool {
        self.rho.values().iter().all(|r| *r == 0.0)
    }

    /// First nonzero eigenvalue of `Δ_g`, via the default subspace solver.
    pub fn lambda1(&self) -> Result<f64> {
        self.lambda1
            .get_or_init(|| eigen::first_eigenvalue(self, eigen::DEFAULT_SOLVER))
            .clone()
    }

    pub(crate) fn check(&self, n: usize) -> Result<()> {
        check_len(&self.grid, n)
    }

    /// Quadrature weights of `dA_g` at each node.
    pub fn area_weights(&self) -> Vec<f64> {
        self.conformal
            .iter()
            .zip(self.grid.weights())
            .map(|(c, w)| c * w)
            .collect()
    }

    pub fn integrate(&self, f: &GridFunction) -> Result<f64> {
        self.check(f.len())?;
        Ok(self.integrate_slice(f.values()))
    }

    pub fn integrate_complex(&self, f: &GridFunction<Complex64>) -> Result<Complex64> {
        self.check(f.len())?;
        Ok(f.values()
            .iter()
            .zip(&self.conformal)
            .zip(self.grid.weights())
            .map(|((v, c), w)| v * (c * w))
            .sum())
    }

    pub(crate) fn integrate_slice(&self, f: &[f64]) -> f64 {
        f.iter()
            .zip(&self.conformal)
            .zip(self.grid.weights())
            .map(|((v, c), w)| v * c * w)
            .sum()
    }

    pub(crate) fn inner_slice(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter()
            .zip(g)
            .zip(self.conformal.iter().zip(self.grid.weights()))
            .map(|((a, b), (c, w))| a * b * c * w)
            .sum()
    }

    /// `Δ_g f = e^{-2ρ} Δ_round f` with `Δ = δd` (nonnegative spectrum).
    pub fn laplace_beltrami(&self, f: &GridFunction) -> Result<GridFunction> {
        self.check(f.len())?;
        let coeffs = self.grid.analyze(f.values());
        Ok(self.laplace_of_coeffs(&coeffs))
    }

    pub(crate) fn laplace_of_coeffs(&self, coeffs: &[f64]) -> GridFunction {
        let scaled = round_laplacian(coeffs);
        let mut values = self.grid.synthesize(&scaled);
        for (v, c) in values.iter_mut().zip(&self.conformal) {
            *v /= c;
        }
        GridFunction::new(values)
    }

    /// `∫ |df|²_g dA_g`, which is conformally invariant and equals
    /// `Σ l(l+1) f_{lm}²` for the band-limited part of `f`.
    pub fn dirichlet_energy(&self, f: &GridFunction) -> Result<f64> {
        self.check(f.len())?;
        Ok(dirichlet_of_coeffs(&self.grid.analyze(f.values())))
    }

    pub fn norms(&self, f: &GridFunction) -> Result<Norms> {
        self.check(f.len())?;
        let l2sq = self.inner_slice(f.values(), f.values());
        let coeffs = self.grid.analyze(f.values());
        let h1sq = l2sq + dirichlet_of_coeffs(&coeffs);
        Ok(Norms {
            l2: l2sq.sqrt(),
            h1: h1sq.sqrt(),
            c0: sup_norm_with_coeffs(&self.grid, f.values(), &coeffs),
        })
    }

    pub fn l2_norm(&self, f: &GridFunction) -> Result<f64> {
        self.check(f.len())?;
        Ok(self.inner_slice(f.values(), f.values()).sqrt())
    }

    /// `L²_g` norm of the band-limited part of a residual `r`, i.e. of
    /// `e^{-2ρ} Π(e^{2ρ} r)` where `Π` projects onto degrees `≤ l_max`.
    /// This is the quantity the Galerkin solvers drive to zero.
    pub fn projected_residual(&self, r: &[f64]) -> f64 {
        let weighted: Vec<f64> = r.iter().zip(&self.conformal).map(|(a, c)| a * c).collect();
        let coeffs = self.grid.analyze(&weighted);
        self.residual_norm_of_coeffs(&coeffs)
    }

    /// Same as [`SurfaceMetric::projected_residual`] for a residual already
    /// expressed as coefficients of `e^{2ρ} r`.
    pub(crate) fn residual_norm_of_coeffs(&self, coeffs: &[f64]) -> f64 {
        if self.is_round() {
            return coeffs.iter().map(|c| c * c).sum::<f64>().sqrt();
        }
        let values = self.grid.synthesize(coeffs);
        values
            .iter()
            .zip(&self.conformal)
            .zip(self.grid.weights())
            .map(|((v, c), w)| v * v / c * w)
            .sum::<f64>()
            .sqrt()
    }

    /// Galerkin mass action: coefficients of `Π(e^{2ρ} · synth(coeffs))`.
    pub(crate) fn mass_apply(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut values = self.grid.synthesize(coeffs);
        for (v, c) in values.iter_mut().zip(&self.conformal) {
            *v *= c;
        }
        self.grid.analyze(&values)
    }
}

fn check_len(grid: &SphereGrid, n: usize) -> Result<()> {
    if n != grid.node_count() {
        return Err(Error::Dimension {
            expected: grid.node_count(),
            found: n,
        });
    }
    Ok(())
}

pub(crate) fn round_laplacian(coeffs: &[f64]) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (l, _) = SphereGrid::degree_order(i);
            (l * (l + 1)) as f64 * c
        })
        .collect()
}

pub(crate) fn dirichlet_of_coeffs(coeffs: &[f64]) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let (l, _) = SphereGrid::degree_order(i);
            (l * (l + 1)) as f64 * c * c
        })
        .sum()
}

/// Nodal maximum of `|f|`, refined by local maximisation of the spectral
/// interpolant when `f` is resolved by the grid. Unresolved data fall back to
/// the nodal maximum.
pub(crate) fn sup_norm_with_coeffs(grid: &SphereGrid, values: &[f64], coeffs: &[f64]) -> f64 {
    let nodal = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if nodal == 0.0 {
        return 0.0;
    }
    // Resolved means the spectrum has decayed to roundoff over the top third
    // of the band.
    let cut = (2 * grid.l_max()) / 3;
    let (mut head, mut tail) = (0.0f64, 0.0f64);
    for (i, c) in coeffs.iter().enumerate() {
        let (l, _) = SphereGrid::degree_order(i);
        if l > cut {
            tail = tail.max(c.abs());
        } else {
            head = head.max(c.abs());
        }
    }
    if grid.l_max() < 3 || tail > 1e-12 * head {
        return nodal;
    }
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].abs().total_cmp(&values[a].abs()));
    let step0 = PI / grid.n_theta() as f64;
    let mut best = nodal;
    for &start in order.iter().take(4) {
        best = best.max(polish_extremum(grid, coeffs, start, step0));
    }
    best
}

fn polish_extremum(grid: &SphereGrid, coeffs: &[f64], start: usize, step0: f64) -> f64 {
    let p0 = grid.node_vector(start);
    // orthonormal tangent basis at p0
    let helper = if p0[2].abs() < 0.9 {
        [0.0, 0.0, 1.0]
    } else {
        [1.0, 0.0, 0.0]
    };
    let e1 = normalize(cross(helper, p0));
    let e2 = cross(p0, e1);
    let eval = |s: f64, t: f64| {
        let p = normalize([
            p0[0] + s * e1[0] + t * e2[0],
            p0[1] + s * e1[1] + t * e2[1],
            p0[2] + s * e1[2] + t * e2[2],
        ]);
        let theta = p[2].clamp(-1.0, 1.0).acos();
        let phi = p[1].atan2(p[0]);
        grid.evaluate_at(coeffs, theta, phi).abs()
    };
    let (mut s, mut t) = (0.0, 0.0);
    let mut best = eval(s, t);
    let mut h = step0;
    let dirs = [
        (1.0, 0.0),
        (-1.0, 0.0),
        (0.0, 1.0),
        (0.0, -1.0),
        (FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        (-FRAC_1_SQRT_2, FRAC_1_SQRT_2),
        (FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
        (-FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
    ];
    let mut evals = 0;
    while h > 1e-10 && evals < 4000 {
        let mut moved = false;
        for (ds, dt) in dirs {
            let v = eval(s + h * ds, t + h * dt);
            evals += 1;
            if v > best {
                best = v;
                s += h * ds;
                t += h * dt;
                moved = true;
                break;
            }
        }
        if !moved {
            h *= 0.5;
        }
    }
    best
}

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn normalize(a: [f64; 3]) -> [f64; 3] {
    let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
    [a[0] / n, a[1] / n, a[2] / n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(l: usize) -> Arc<SphereGrid> {
        Arc::new(SphereGrid::new(l).unwrap())
    }

    #[test]
    fn round_area_and_orthogonality() {
        let g = grid(31);
        let m = SurfaceMetric::round(g.clone());
        assert!((m.area() - 4.0 * PI).abs() < 1e-10 * 4.0 * PI);
        let one = GridFunction::constant(&g, 1.0);
        assert!((m.integrate(&one).unwrap() - 4.0 * PI).abs() < 1e-12);
        let y10 = GridFunction::harmonic(&g, 1, 0);
        assert!(m.integrate(&y10).unwrap().abs() < 1e-14);
    }

    #[test]
    fn grid_mismatch_is_a_dimension_error() {
        let m = SurfaceMetric::round(grid(7));
        let f = GridFunction::constant(&SphereGrid::new(5).unwrap(), 1.0);
        assert!(matches!(m.integrate(&f), Err(Error::Dimension { .. })));
        assert!(matches!(
            m.laplace_beltrami(&f),
            Err(Error::Dimension { .. })
        ));
    }

    #[test]
    fn laplacian_eigen_relations() {
        let g = grid(15);
        let m = SurfaceMetric::round(g.clone());
        let y10 = GridFunction::harmonic(&g, 1, 0);
        let lap = m.laplace_beltrami(&y10).unwrap();
        for (a, b) in lap.values().iter().zip(y10.values()) {
            assert!((a - 2.0 * b).abs() < 1e-12);
        }
        let c = GridFunction::constant(&g, 3.5);
        assert!(m.laplace_beltrami(&c).unwrap().max_abs() < 1e-12);

        let bumped =
            SurfaceMetric::from_rho_terms(g.clone(), &[RhoTerm::from((1, 0, 0.1))]).unwrap();
        let y21 = GridFunction::harmonic(&g, 2, 1);
        let lap = bumped.laplace_beltrami(&y21).unwrap();
        for i in 0..g.node_count() {
            let expected = (-2.0 * bumped.rho().values()[i]).exp() * 6.0 * y21.values()[i];
            assert!((lap.values()[i] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn norms_of_simple_functions() {
        let g = grid(31);
        let m = SurfaceMetric::round(g.clone());
        let n = m.norms(&GridFunction::constant(&g, 1.0)).unwrap();
        assert!((n.l2 - (4.0 * PI).sqrt()).abs() < 1e-12);
        assert!((n.h1 - (4.0 * PI).sqrt()).abs() < 1e-12);
        assert!((n.c0 - 1.0).abs() < 1e-13, "{}", n.c0);

        let y10 = GridFunction::harmonic(&g, 1, 0);
        let n = m.norms(&y10).unwrap();
        assert!((n.h1 * n.h1 - 3.0 * n.l2 * n.l2).abs() < 1e-12);
        assert!((n.l2 - 1.0).abs() < 1e-12);
        // the maximum sits at the pole, which is not a node
        let exact = (3.0 / (4.0 * PI)).sqrt();
        assert!((n.c0 - exact).abs() < 1e-12, "{} vs {exact}", n.c0);
        let nodal = y10.max_abs();
        assert!(nodal < exact && exact - nodal < 1e-2);
    }

    #[test]
    fn unresolved_data_use_nodal_maximum() {
        let g = grid(15);
        let m = SurfaceMetric::round(g.clone());
        let kink = GridFunction::harmonic(&g, 1, 0).map(f64::abs);
        assert_eq!(m.norms(&kink).unwrap().c0, kink.max_abs());
    }

    #[test]
    fn conformal_factor_must_be_positive() {
        let g = grid(5);
        let mut f = vec![1.0; g.node_count()];
        f[3] = 0.0;
        assert!(SurfaceMetric::from_conformal_factor(g.clone(), &f).is_err());
        assert!(SurfaceMetric::from_rho_terms(g, &[RhoTerm::from((6, 0, 0.1))]).is_err());
    }
}
