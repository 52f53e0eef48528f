//! Spectra of the one-vortex moduli space.
//!
//! For `n = 1` the moduli space is the sphere of divisor points. The metric
//! `g_ε` is sampled over a moduli grid by solving a vortex at every node and
//! expressing the resulting `2×2` metric in the round orthonormal frame
//! `(e_θ, e_φ)` of the moduli sphere. Its conformal factor relative to the
//! round unit metric then defines a surface metric whose Laplace spectrum is
//! compared with the Fubini–Study one.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::bundle::{Divisor, DivisorPoint, HermitianStructure, Section};
use crate::eigen;
use crate::error::{Error, Result};
use crate::moduli::{assemble_metric, horizontal_basis, horizontal_lift};
use crate::sphere::{GridFunction, SphereGrid, SurfaceMetric};
use crate::vortex::solve_vortex;

/// A group of (numerically) equal eigenvalues.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Cluster {
    pub k: usize,
    pub value: f64,
    pub degeneracy: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpectrumReport {
    /// Nondecreasing, repeated according to multiplicity, starting at `λ₀`.
    pub eigenvalues: Vec<f64>,
    pub clusters: Vec<Cluster>,
}

impl SpectrumReport {
    /// Groups sorted eigenvalues whose relative gap is below `tol`.
    pub fn from_eigenvalues(eigenvalues: Vec<f64>, tol: f64) -> Self {
        let mut clusters: Vec<Cluster> = Vec::new();
        let mut members: Vec<f64> = Vec::new();
        for &v in &eigenvalues {
            if let Some(&last) = members.last() {
                let scale = v.abs().max(last.abs()).max(f64::MIN_POSITIVE);
                if (v - last).abs() > tol * scale {
                    push_cluster(&mut clusters, &members);
                    members.clear();
                }
            }
            members.push(v);
        }
        if !members.is_empty() {
            push_cluster(&mut clusters, &members);
        }
        Self {
            eigenvalues,
            clusters,
        }
    }
}

fn push_cluster(clusters: &mut Vec<Cluster>, members: &[f64]) {
    clusters.push(Cluster {
        k: clusters.len(),
        value: members.iter().sum::<f64>() / members.len() as f64,
        degeneracy: members.len(),
    });
}

fn binomial(n: usize, k: usize) -> u128 {
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Degeneracy of the `k`-th Fubini–Study eigenvalue on `CPⁿ`,
/// `(n + 2k)/n · C(n−1+k, k)²`.
pub fn fs_degeneracy(n: usize, k: usize) -> usize {
    if k == 0 {
        return 1;
    }
    let b = binomial(n - 1 + k, k);
    ((n + 2 * k) as u128 * b * b / n as u128) as usize
}

/// Closed-form spectrum `λ_k = 4k(n+k)` of the Fubini–Study metric of
/// holomorphic sectional curvature 4 on `CPⁿ`, clusters `0..=k_max`.
pub fn fs_spectrum(n: usize, k_max: usize) -> Result<SpectrumReport> {
    if n == 0 || k_max == 0 {
        return Err(Error::Precondition(
            "fs_spectrum needs n >= 1 and k_max >= 1".into(),
        ));
    }
    let mut eigenvalues = Vec::new();
    let mut clusters = Vec::new();
    for k in 0..=k_max {
        let value = (4 * k * (n + k)) as f64;
        let d = fs_degeneracy(n, k);
        eigenvalues.extend(std::iter::repeat_n(value, d));
        clusters.push(Cluster {
            k,
            value,
            degeneracy: d,
        });
    }
    Ok(SpectrumReport {
        eigenvalues,
        clusters,
    })
}

/// Sandwich for `λ_k(g_ε)/λ_k(g₀)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RatioBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `((1−Cε)ⁿ/(1+Cε)^{n+1}, (1+Cε)ⁿ/(1−Cε)^{n+1})`.
pub fn ratio_bounds(c: f64, eps: f64, n: usize) -> Result<RatioBounds> {
    if !(c > 0.0) || !(eps >= 0.0) {
        return Err(Error::Domain(format!(
            "ratio bounds need C > 0 and eps >= 0, got C = {c}, eps = {eps}"
        )));
    }
    let x = c * eps;
    if x >= 1.0 {
        return Err(Error::Domain(format!(
            "eps = {eps} is not below 1/C = {}",
            1.0 / c
        )));
    }
    let n = n as i32;
    Ok(RatioBounds {
        lower: (1.0 - x).powi(n) / (1.0 + x).powi(n + 1),
        upper: (1.0 + x).powi(n) / (1.0 - x).powi(n + 1),
    })
}

/// The metric `g_ε` on the one-vortex moduli sphere.
#[derive(Clone, Debug)]
pub struct ModuliMetricField {
    pub moduli_grid: Arc<SphereGrid>,
    /// Conformal factor of `g_ε` in the stereographic coordinate
    /// `ζ = tan(θ/2) e^{iφ}` of the divisor point.
    pub phi: GridFunction,
    /// `Φ / Φ_round`, the conformal factor relative to the round unit metric.
    pub ratio: GridFunction,
    /// Largest normalised departure from conformality over the nodes.
    pub anisotropy: f64,
    /// Largest `‖G_ε − I‖₂` over the nodes.
    pub max_deviation: f64,
    pub eps: f64,
}

impl ModuliMetricField {
    /// Volume of `(M₁, g) = (M₁, ε g_ε)`.
    pub fn volume(&self) -> f64 {
        let sum: f64 = self
            .ratio
            .values()
            .iter()
            .zip(self.moduli_grid.weights())
            .map(|(r, w)| r * w)
            .sum();
        self.eps * sum
    }

    /// Relative spread `(max − min)/mean` of the conformal factor.
    pub fn relative_variation(&self) -> f64 {
        let v = self.ratio.values();
        let max = v.iter().cloned().fold(f64::MIN, f64::max);
        let min = v.iter().cloned().fold(f64::MAX, f64::min);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        (max - min) / mean
    }

    /// The field as a surface metric on the moduli sphere.
    pub fn surface_metric(&self) -> Result<SurfaceMetric> {
        SurfaceMetric::from_conformal_factor(self.moduli_grid.clone(), self.ratio.values())
    }

    /// Field with a prescribed conformal factor relative to the round metric.
    pub fn from_ratio(moduli_grid: Arc<SphereGrid>, ratio: GridFunction, eps: f64) -> Self {
        let phi = GridFunction::new(
            moduli_grid
                .nodes()
                .zip(ratio.values())
                .map(|((theta, _), r)| r * round_factor(theta))
                .collect(),
        );
        Self {
            moduli_grid,
            phi,
            ratio,
            anisotropy: 0.0,
            max_deviation: 0.0,
            eps,
        }
    }

    /// The Fubini–Study field: the round sphere of radius ½.
    pub fn fubini_study(moduli_grid: Arc<SphereGrid>) -> Self {
        let ratio = GridFunction::constant(&moduli_grid, 0.25);
        Self::from_ratio(moduli_grid, ratio, 0.0)
    }
}

/// `4/(1+|ζ|²)²` at colatitude `θ`.
fn round_factor(theta: f64) -> f64 {
    let z2 = (0.5 * theta).tan().powi(2);
    4.0 / ((1.0 + z2) * (1.0 + z2))
}

struct NodeMetric {
    matrix: [[f64; 2]; 2],
    deviation: f64,
}

/// Metric of `g_ε` at the divisor point `(θ, φ)` in the round orthonormal
/// frame `(e_θ, e_φ)` of the moduli sphere.
fn node_metric(theta: f64, phi: f64, eps: f64, h: &HermitianStructure) -> Result<NodeMetric> {
    let d = Divisor::new(vec![DivisorPoint {
        theta,
        phi,
        multiplicity: 1,
    }])?;
    let s = solve_vortex(&d, eps, h)?;
    let frame = horizontal_basis(&s.section, h.gram_matrix())?;
    let sample = assemble_metric(&s, &frame, h)?;

    // Raw coefficients of the divisor polynomial are (β, −α) with
    // (α, β) = (cos θ/2, sin θ/2 e^{iφ}); φ̂ = λ·(β, −α) for a complex λ.
    let (sh, ch) = (0.5 * theta).sin_cos();
    let rot = Complex64::from_polar(1.0, phi);
    let raw = [rot * sh, Complex64::new(-ch, 0.0)];
    let j = if raw[0].norm() >= raw[1].norm() { 0 } else { 1 };
    let lambda = s.section.coeffs()[j] / raw[j];
    let d_theta = Section::new(vec![lambda * rot * (0.5 * ch), lambda * (0.5 * sh)]);
    let d_phi = Section::new(vec![
        lambda * Complex64::i() * rot * (0.5 / ch),
        Complex64::new(0.0, 0.0),
    ]);
    let jac: Vec<Vec<f64>> = [d_theta, d_phi]
        .iter()
        .map(|v| Ok(frame.components(&horizontal_lift(&frame, v)?)))
        .collect::<Result<_>>()?;
    let g = &sample.g_eps;
    let mut matrix = [[0.0; 2]; 2];
    for (a, ja) in jac.iter().enumerate() {
        for (b, jb) in jac.iter().enumerate() {
            let mut total = 0.0;
            for r in 0..g.nrows() {
                for c in 0..g.ncols() {
                    total += ja[r] * g[(r, c)] * jb[c];
                }
            }
            matrix[a][b] = total;
        }
    }
    Ok(NodeMetric {
        matrix,
        deviation: sample.deviation,
    })
}

/// Samples `g_ε` over the moduli grid (one vortex solve per node).
pub fn moduli_metric_field(
    eps: f64,
    h: &HermitianStructure,
    moduli_grid: Arc<SphereGrid>,
) -> Result<ModuliMetricField> {
    if h.degree() != 1 {
        return Err(Error::Precondition(format!(
            "moduli metric field is implemented for degree 1, got {}",
            h.degree()
        )));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    let nodes: Vec<(f64, f64)> = moduli_grid.nodes().collect();
    let results = nodes
        .par_iter()
        .map(|&(theta, phi)| node_metric(theta, phi, eps, h))
        .collect::<Result<Vec<_>>>()?;
    let mut ratio = Vec::with_capacity(results.len());
    let mut anisotropy = 0.0f64;
    let mut max_deviation = 0.0f64;
    for r in &results {
        let [[a, b], [_, c]] = r.matrix;
        let mean = 0.5 * (a + c);
        let aniso = (0.25 * (a - c) * (a - c) + b * b).sqrt() / mean;
        anisotropy = anisotropy.max(aniso);
        max_deviation = max_deviation.max(r.deviation);
        ratio.push(mean);
    }
    if anisotropy > 1e-2 {
        return Err(Error::Numeric(format!(
            "moduli metric is not conformal to tolerance: anisotropy {anisotropy:.3e}"
        )));
    }
    let mut field = ModuliMetricField::from_ratio(moduli_grid, GridFunction::new(ratio), eps);
    field.anisotropy = anisotropy;
    field.max_deviation = max_deviation;
    Ok(field)
}

/// Lowest Laplace eigenvalues of the field, through cluster `k_max` of the
/// `n = 1` reference (`(k_max + 1)²` values).
pub fn laplace_spectrum(
    f: &ModuliMetricField,
    k_max: usize,
    solver: &str,
) -> Result<SpectrumReport> {
    if f.anisotropy > 1e-2 {
        return Err(Error::Precondition(format!(
            "field anisotropy {:.3e} is outside tolerance",
            f.anisotropy
        )));
    }
    let count = (k_max + 1) * (k_max + 1);
    let metric = f.surface_metric()?;
    let values = eigen::solver(solver)?.lowest(&metric, count)?;
    Ok(SpectrumReport::from_eigenvalues(values, 1e-3))
}

/// One row of an eigenvalue comparison.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct RatioRow {
    pub index: usize,
    pub k: usize,
    pub lambda_eps: f64,
    pub lambda_fs: f64,
    pub ratio: f64,
}

/// Pairs eigenvalues `1..` of `computed` with the reference, individually.
pub fn compare_spectra(computed: &SpectrumReport, reference: &SpectrumReport) -> Vec<RatioRow> {
    let mut cluster_of = Vec::new();
    for c in &reference.clusters {
        cluster_of.extend(std::iter::repeat_n(c.k, c.degeneracy));
    }
    computed
        .eigenvalues
        .iter()
        .zip(&reference.eigenvalues)
        .enumerate()
        .skip(1)
        .map(|(index, (a, b))| RatioRow {
            index,
            k: cluster_of[index],
            lambda_eps: *a,
            lambda_fs: *b,
            ratio: a / b,
        })
        .collect()
}

/// Fubini–Study conformal factor `1/(1+|ζ|²)²` at colatitude `θ`.
pub fn fs_phi(theta: f64) -> f64 {
    0.25 * round_factor(theta)
}

/// `πⁿ εⁿ / n!`.
pub fn expected_volume(n: usize, eps: f64) -> f64 {
    (1..=n).fold(1.0, |acc, k| acc * PI * eps / k as f64)
}

/// Spectral norm distance of a symmetric matrix from the identity.
pub fn identity_deviation(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    let eig = nalgebra::SymmetricEigen::new(m.clone());
    eig.eigenvalues
        .iter()
        .fold(0.0f64, |acc, v| acc.max((v - 1.0).abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::constant_curvature_weight;
    use crate::sphere::RhoTerm;

    #[test]
    fn fs_reference_values() {
        let s = fs_spectrum(1, 3).unwrap();
        let expected = [(0.0, 1), (8.0, 3), (24.0, 5), (48.0, 7)];
        for (c, (v, d)) in s.clusters.iter().zip(expected) {
            assert_eq!((c.value, c.degeneracy), (v, d));
        }
        assert_eq!(s.eigenvalues.len(), 16);
        let s2 = fs_spectrum(2, 2).unwrap();
        assert_eq!((s2.clusters[1].value, s2.clusters[1].degeneracy), (12.0, 8));
        assert_eq!(
            (s2.clusters[2].value, s2.clusters[2].degeneracy),
            (32.0, 27)
        );
        for k in 0..6 {
            assert_eq!(fs_degeneracy(1, k), 2 * k + 1);
        }
        assert!(fs_spectrum(0, 2).is_err());
    }

    // Dimension of bidegree-(k,k) harmonic polynomials on C^{n+1}:
    // dim P_{k,k} − dim P_{k−1,k−1} with dim P_{k,k} = C(n+k, k)².
    #[test]
    fn degeneracies_match_harmonic_polynomial_count() {
        for n in 1..5 {
            for k in 1..6 {
                let a = binomial(n + k, k).pow(2);
                let b = binomial(n + k - 1, k - 1).pow(2);
                assert_eq!(fs_degeneracy(n, k) as u128, a - b, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn ratio_bound_values() {
        let b = ratio_bounds(1.0, 0.1, 1).unwrap();
        assert!((b.lower - 0.9 / 1.21).abs() < 1e-14);
        assert!((b.upper - 1.1 / 0.81).abs() < 1e-14);
        let z = ratio_bounds(3.0, 0.0, 2).unwrap();
        assert_eq!((z.lower, z.upper), (1.0, 1.0));
        assert!(matches!(ratio_bounds(2.0, 0.5, 1), Err(Error::Domain(_))));
        assert!(ratio_bounds(-1.0, 0.1, 1).is_err());
    }

    #[test]
    fn fs_field_spectrum_and_scaling() {
        let grid = Arc::new(SphereGrid::new(15).unwrap());
        let fs = ModuliMetricField::fubini_study(grid.clone());
        let s = laplace_spectrum(&fs, 3, "dense").unwrap();
        let reference = fs_spectrum(1, 3).unwrap();
        for (a, b) in s.eigenvalues.iter().zip(&reference.eigenvalues) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
        assert_eq!(s.clusters.len(), 4);
        let fs_area: f64 = fs
            .ratio
            .values()
            .iter()
            .zip(grid.weights())
            .map(|(r, w)| r * w)
            .sum();
        assert!((fs_area - PI).abs() < 1e-12);
        let scaled = ModuliMetricField::from_ratio(grid, fs.ratio.scaled(3.0), 0.1);
        let t = laplace_spectrum(&scaled, 2, "subspace").unwrap();
        for (a, b) in t.eigenvalues.iter().zip(&s.eigenvalues).skip(1) {
            assert!((a - b / 3.0).abs() < 1e-9 * b);
        }
        assert!((scaled.volume() - 0.1 * 3.0 * PI).abs() < 1e-10);
    }

    #[test]
    fn round_domain_field_is_round() {
        let g = Arc::new(SphereGrid::new(23).unwrap());
        let m = Arc::new(SurfaceMetric::round(g));
        let h = constant_curvature_weight(m, 1).unwrap();
        let field = moduli_metric_field(0.2, &h, Arc::new(SphereGrid::new(5).unwrap())).unwrap();
        assert!(field.relative_variation() <= 1e-6);
        assert!(field.anisotropy <= 1e-3);
        assert!((field.volume() - PI * 0.2).abs() < 0.01 * PI * 0.2);
        for (v, (theta, _)) in field.phi.values().iter().zip(field.moduli_grid.nodes()) {
            assert!((v / fs_phi(theta) - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn bumped_domain_field_is_conformal() {
        let g = Arc::new(SphereGrid::new(23).unwrap());
        let m = Arc::new(SurfaceMetric::from_rho_terms(g, &[RhoTerm::from((1, 0, 0.3))]).unwrap());
        let h = constant_curvature_weight(m, 1).unwrap();
        let field = moduli_metric_field(0.2, &h, Arc::new(SphereGrid::new(7).unwrap())).unwrap();
        assert!(field.anisotropy <= 1e-3);
        assert!(matches!(
            moduli_metric_field(1.2, &h, field.moduli_grid.clone()),
            Err(Error::Precondition(_))
        ));
    }
}
