//! Degree-`n` hermitian line bundle over the sphere, its constant-curvature
//! hermitian structure and the `(n+1)`-dimensional space of holomorphic
//! sections.
//!
//! A holomorphic section is stored as a homogeneous polynomial
//! `P(z₀, z₁) = Σ a_j z₀^{n-j} z₁^j` evaluated at
//! `(z₀, z₁) = (cos(θ/2), sin(θ/2) e^{iφ})`, so the round weight
//! `(1 + |z|²)^{-n}` of the stereographic polynomial is absorbed exactly and
//! both poles are regular. The pointwise norm is `|P|² e^{-2w}` where the
//! mean-zero weight `w` makes the Chern curvature constant.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{solve_poisson, GridFunction, SurfaceMetric};

/// One zero of a section, as spherical angles with multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64, usize)", into = "(f64, f64, usize)")]
pub struct DivisorPoint {
    pub theta: f64,
    pub phi: f64,
    pub multiplicity: usize,
}

impl From<(f64, f64, usize)> for DivisorPoint {
    fn from((theta, phi, multiplicity): (f64, f64, usize)) -> Self {
        Self {
            theta,
            phi,
            multiplicity,
        }
    }
}

impl From<DivisorPoint> for (f64, f64, usize) {
    fn from(p: DivisorPoint) -> Self {
        (p.theta, p.phi, p.multiplicity)
    }
}

impl DivisorPoint {
    pub fn unit_vector(&self) -> [f64; 3] {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        [st * cp, st * sp, ct]
    }

    pub fn from_unit_vector(v: [f64; 3], multiplicity: usize) -> Self {
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        Self {
            theta: (v[2] / n).clamp(-1.0, 1.0).acos(),
            phi: v[1].atan2(v[0]),
            multiplicity,
        }
    }

    /// Homogeneous coordinates `(cos(θ/2), sin(θ/2) e^{iφ})`.
    pub fn homogeneous(&self) -> (Complex64, Complex64) {
        let (s, c) = (0.5 * self.theta).sin_cos();
        (Complex64::new(c, 0.0), Complex64::from_polar(s, self.phi))
    }

    pub fn antipode(&self) -> Self {
        let v = self.unit_vector();
        Self::from_unit_vector([-v[0], -v[1], -v[2]], self.multiplicity)
    }
}

/// Effective divisor: a multiset of points on the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Divisor {
    points: Vec<DivisorPoint>,
}

impl Divisor {
    pub fn new(points: Vec<DivisorPoint>) -> Result<Self> {
        for p in &points {
            if p.multiplicity == 0 {
                return Err(Error::Precondition(
                    "divisor multiplicities must be positive".into(),
                ));
            }
            if !(p.theta.is_finite() && p.phi.is_finite()) || !(0.0..=PI).contains(&p.theta) {
                return Err(Error::Precondition(format!(
                    "divisor point (θ={}, φ={}) is not on the sphere",
                    p.theta, p.phi
                )));
            }
        }
        Ok(Self { points })
    }

    pub fn from_angles(points: &[(f64, f64, usize)]) -> Result<Self> {
        Self::new(points.iter().copied().map(DivisorPoint::from).collect())
    }

    /// The empty divisor (degree zero).
    pub fn empty() -> Self {
        Self { points: Vec::new() }
    }

    /// `n` independent uniformly distributed points.
    pub fn random(n: usize, rng: &mut impl Rng) -> Self {
        let points = (0..n)
            .map(|_| {
                let z: f64 = rng.random_range(-1.0..1.0);
                let phi: f64 = rng.random_range(0.0..2.0 * PI);
                DivisorPoint {
                    theta: z.acos(),
                    phi,
                    multiplicity: 1,
                }
            })
            .collect();
        Self { points }
    }

    pub fn points(&self) -> &[DivisorPoint] {
        &self.points
    }

    pub fn degree(&self) -> usize {
        self.points.iter().map(|p| p.multiplicity).sum()
    }

    /// Image of the divisor under a rotation matrix.
    pub fn rotated(&self, rotation: &[[f64; 3]; 3]) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| {
                let v = p.unit_vector();
                let w = [0, 1, 2].map(|r| (0..3).map(|c| rotation[r][c] * v[c]).sum());
                DivisorPoint::from_unit_vector(w, p.multiplicity)
            })
            .collect();
        Self { points }
    }
}

/// Holomorphic section of the degree-`n` bundle in the monomial basis
/// `e_j = z₀^{n-j} z₁^j`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Section {
    #[serde(with = "complex_list")]
    coeffs: Vec<Complex64>,
}

impl Section {
    pub fn new(coeffs: Vec<Complex64>) -> Self {
        assert!(!coeffs.is_empty(), "a section has at least one coefficient");
        Self { coeffs }
    }

    pub fn monomial(degree: usize, j: usize) -> Self {
        let mut coeffs = vec![Complex64::new(0.0, 0.0); degree + 1];
        coeffs[j] = Complex64::new(1.0, 0.0);
        Self { coeffs }
    }

    pub fn zero(degree: usize) -> Self {
        Self {
            coeffs: vec![Complex64::new(0.0, 0.0); degree + 1],
        }
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.norm_sqr() == 0.0)
    }

    pub fn scaled(&self, s: Complex64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * s).collect(),
        }
    }

    /// `self + s·other`.
    pub fn axpy(&self, s: Complex64, other: &Section) -> Self {
        Self {
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(a, b)| a + s * b)
                .collect(),
        }
    }

    /// `P(z₀, z₁)` at a point.
    pub fn eval_at(&self, theta: f64, phi: f64) -> Complex64 {
        let (s, c) = (0.5 * theta).sin_cos();
        let z1 = Complex64::from_polar(s, phi);
        let n = self.degree();
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, a)| a * c.powi((n - j) as i32) * z1.powu(j as u32))
            .sum()
    }
}

/// The degree-`n` bundle with its constant-curvature hermitian structure.
#[derive(Debug, Clone)]
pub struct HermitianStructure {
    degree: usize,
    metric: Arc<SurfaceMetric>,
    w: GridFunction,
    weight: Vec<f64>,
    // z₀^{n-j} z₁^j at every node, node-major.
    basis: Vec<Complex64>,
    gram: DMatrix<Complex64>,
    curvature_defect: f64,
}

impl HermitianStructure {
    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn metric(&self) -> &Arc<SurfaceMetric> {
        &self.metric
    }

    /// Mean-zero curvature-correction weight `w`.
    pub fn weight_exponent(&self) -> &GridFunction {
        &self.w
    }

    /// `e^{-2w}` at every node.
    pub fn fibre_weight(&self) -> &[f64] {
        &self.weight
    }

    /// Constant value `2πn/|Σ|` of the Chern curvature density.
    pub fn target_curvature(&self) -> f64 {
        2.0 * PI * self.degree as f64 / self.metric.area()
    }

    /// `sup |*F_h − 2πn/|Σ||` measured after construction.
    pub fn curvature_defect(&self) -> f64 {
        self.curvature_defect
    }

    /// Chern curvature density `*F_h = (n/2) e^{-2ρ} − Δ_g w`.
    pub fn curvature(&self) -> GridFunction {
        let lap = self
            .metric
            .laplace_beltrami(&self.w)
            .expect("weight lives on the metric grid");
        let half_n = 0.5 * self.degree as f64;
        GridFunction::new(
            self.metric
                .conformal()
                .iter()
                .zip(lap.values())
                .map(|(c, l)| half_n / c - l)
                .collect(),
        )
    }

    /// Monomial Gram matrix `M_jk = ⟨e_j, e_k⟩_{L²}` (conjugate-linear in `j`).
    pub fn gram_matrix(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    fn check_section(&self, s: &Section) -> Result<()> {
        if s.degree() != self.degree {
            return Err(Error::Precondition(format!(
                "section of degree {} used with a bundle of degree {}",
                s.degree(),
                self.degree
            )));
        }
        Ok(())
    }

    /// `P` at every node (the section in the `e^{-2w}`-weighted trivialisation).
    pub fn evaluate(&self, s: &Section) -> Result<Vec<Complex64>> {
        self.check_section(s)?;
        let k = self.degree + 1;
        Ok(self
            .basis
            .chunks_exact(k)
            .map(|row| row.iter().zip(s.coeffs()).map(|(b, a)| a * b).sum())
            .collect())
    }

    /// `(∂P/∂θ, (1/sin θ) ∂P/∂φ)` at every node.
    pub fn evaluate_gradient(&self, s: &Section) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
        self.check_section(s)?;
        let n = self.degree;
        let grid = self.metric.grid();
        let mut d_theta = Vec::with_capacity(grid.node_count());
        let mut d_phi = Vec::with_capacity(grid.node_count());
        for (theta, phi) in grid.nodes() {
            let (sh, ch) = (0.5 * theta).sin_cos();
            let z1 = Complex64::from_polar(sh, phi);
            let rot = Complex64::from_polar(1.0, phi);
            let (mut d0, mut d1) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for (j, a) in s.coeffs().iter().enumerate() {
                if j < n {
                    d0 += a * ((n - j) as f64 * ch.powi((n - j - 1) as i32)) * z1.powu(j as u32);
                }
                if j > 0 {
                    d1 += a * (j as f64 * ch.powi((n - j) as i32)) * z1.powu(j as u32 - 1);
                }
            }
            d_theta.push(-0.5 * sh * d0 + 0.5 * ch * rot * d1);
            d_phi.push(Complex64::i() * rot * d1 / (2.0 * ch));
        }
        Ok((d_theta, d_phi))
    }

    /// Pointwise `|s|²_h`.
    pub fn evaluate_norm(&self, s: &Section) -> Result<GridFunction> {
        let values = self.evaluate(s)?;
        Ok(GridFunction::new(
            values
                .iter()
                .zip(&self.weight)
                .map(|(p, w)| p.norm_sqr() * w)
                .collect(),
        ))
    }

    /// Pointwise `Re h(s, t) = Re(P_s conj(P_t)) e^{-2w}` from evaluated values.
    pub fn real_pairing(&self, s: &[Complex64], t: &[Complex64]) -> Vec<f64> {
        s.iter()
            .zip(t)
            .zip(&self.weight)
            .map(|((a, b), w)| (a * b.conj()).re * w)
            .collect()
    }

    /// Hermitian `L²` product `⟨s, t⟩` (conjugate-linear in `s`).
    pub fn inner(&self, s: &Section, t: &Section) -> Complex64 {
        let k = self.degree + 1;
        let mut total = Complex64::new(0.0, 0.0);
        for j in 0..k {
            for l in 0..k {
                total += s.coeffs()[j].conj() * self.gram[(j, l)] * t.coeffs()[l];
            }
        }
        total
    }

    /// `Re⟨s, t⟩`, the real inner product on sections.
    pub fn real_inner(&self, s: &Section, t: &Section) -> f64 {
        self.inner(s, t).re
    }

    pub fn norm(&self, s: &Section) -> f64 {
        self.inner(s, s).re.max(0.0).sqrt()
    }

    /// Rescales to unit `L²` norm and rotates the phase so the
    /// largest-magnitude coefficient is real and positive.
    pub fn normalize(&self, s: &Section) -> Result<Section> {
        self.check_section(s)?;
        let norm = self.norm(s);
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::Precondition(
                "cannot normalise the zero section".into(),
            ));
        }
        let biggest = s.coeffs().iter().fold(0.0f64, |m, c| m.max(c.norm()));
        let lead = s
            .coeffs()
            .iter()
            .find(|c| c.norm() >= biggest * (1.0 - 1e-9))
            .copied()
            .unwrap_or(Complex64::new(1.0, 0.0));
        let phase = lead.conj() / lead.norm();
        Ok(s.scaled(phase / norm))
    }
}

/// Builds the hermitian structure of constant Chern curvature `2πn/|Σ|`.
pub fn constant_curvature_weight(
    metric: Arc<SurfaceMetric>,
    degree: usize,
) -> Result<HermitianStructure> {
    let grid = metric.grid().clone();
    let target = 2.0 * PI * degree as f64 / metric.area();
    let half_n = 0.5 * degree as f64;
    // Δ_g w = (n/2) e^{-2ρ} − 2πn/|Σ|
    let rhs = GridFunction::new(
        metric
            .conformal()
            .iter()
            .map(|c| half_n / c - target)
            .collect(),
    );
    let w = if rhs.max_abs() <= 1e-13 * (half_n + 1.0) {
        GridFunction::constant(&grid, 0.0)
    } else {
        solve_poisson(&rhs, &metric)?.solution
    };
    let weight: Vec<f64> = w.values().iter().map(|v| (-2.0 * v).exp()).collect();

    let k = degree + 1;
    let mut basis = Vec::with_capacity(grid.node_count() * k);
    for (theta, phi) in grid.nodes() {
        let (s, c) = (0.5 * theta).sin_cos();
        let z1 = Complex64::from_polar(s, phi);
        for j in 0..k {
            basis.push(c.powi((degree - j) as i32) * z1.powu(j as u32));
        }
    }

    let area_w = metric.area_weights();
    let mut gram = DMatrix::<Complex64>::zeros(k, k);
    for (node, row) in basis.chunks_exact(k).enumerate() {
        let wt = area_w[node] * weight[node];
        for j in 0..k {
            for l in j..k {
                gram[(j, l)] += row[j].conj() * row[l] * wt;
            }
        }
    }
    for j in 0..k {
        gram[(j, j)].im = 0.0;
        for l in (j + 1)..k {
            gram[(l, j)] = gram[(j, l)].conj();
        }
    }

    let mut h = HermitianStructure {
        degree,
        metric,
        w,
        weight,
        basis,
        gram,
        curvature_defect: 0.0,
    };
    let defect = h
        .curvature()
        .values()
        .iter()
        .fold(0.0f64, |m, f| m.max((f - target).abs()));
    if defect > 1e-7 * (target + 1.0) {
        return Err(Error::Numeric(format!(
            "hermitian structure curvature deviates from constant by {defect:.3e}"
        )));
    }
    h.curvature_defect = defect;
    Ok(h)
}

/// Product of the linear forms `β z₀ − α z₁` over the divisor points.
pub fn polynomial_from_divisor(d: &Divisor) -> Section {
    let mut coeffs = vec![Complex64::new(1.0, 0.0)];
    for p in d.points() {
        let (alpha, beta) = p.homogeneous();
        for _ in 0..p.multiplicity {
            let mut next = vec![Complex64::new(0.0, 0.0); coeffs.len() + 1];
            for (j, a) in coeffs.iter().enumerate() {
                next[j] += a * beta;
                next[j + 1] -= a * alpha;
            }
            coeffs = next;
        }
    }
    Section::new(coeffs)
}

/// Unit-norm section vanishing exactly on `d`, with the fixed phase
/// convention of [`HermitianStructure::normalize`].
pub fn section_from_divisor(d: &Divisor, h: &HermitianStructure) -> Result<Section> {
    if d.degree() != h.degree() {
        return Err(Error::Precondition(format!(
            "divisor of degree {} does not match bundle degree {}",
            d.degree(),
            h.degree()
        )));
    }
    h.normalize(&polynomial_from_divisor(d))
}

/// Empirical lower bound for `α = sup |φ̂(p)|` over unit sections.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct AlphaEstimate {
    pub alpha: f64,
    pub samples: usize,
    pub l_max: usize,
}

const ALPHA_SEED: u64 = 0x00A1_FA5E;

/// Maximises `|s|_h` over nodes and candidate unit sections: the monomials,
/// then `samples` random unit sections interleaved with sections whose
/// divisor is concentrated at the antipode of a random point. The candidate
/// sequence is fixed, so larger `samples` only adds candidates.
pub fn sup_norm_alpha(h: &HermitianStructure, samples: usize) -> Result<AlphaEstimate> {
    if samples < 100 {
        return Err(Error::Precondition(format!(
            "alpha estimation needs at least 100 samples, got {samples}"
        )));
    }
    let n = h.degree();
    let sup_of = |s: &Section| -> Result<f64> {
        let unit = h.normalize(s)?;
        Ok(h.evaluate_norm(&unit)?.max_abs().sqrt())
    };
    let mut best = 0.0f64;
    for j in 0..=n {
        best = best.max(sup_of(&Section::monomial(n, j))?);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(ALPHA_SEED);
    for _ in 0..samples {
        let coeffs: Vec<Complex64> = (0..=n)
            .map(|_| Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        let random = Section::new(coeffs);
        if !random.is_zero() {
            best = best.max(sup_of(&random)?);
        }
        if n > 0 {
            let centre = Divisor::random(1, &mut rng).points()[0];
            let mut far = centre.antipode();
            far.multiplicity = n;
            let peaked = polynomial_from_divisor(&Divisor { points: vec![far] });
            best = best.max(sup_of(&peaked)?);
        }
    }
    Ok(AlphaEstimate {
        alpha: best,
        samples,
        l_max: h.metric().grid().l_max(),
    })
}

mod complex_list {
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[Complex64], s: S) -> Result<S::Ok, S::Error> {
        let pairs: Vec<[f64; 2]> = v.iter().map(|c| [c.re, c.im]).collect();
        pairs.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let pairs: Vec<[f64; 2]> = Vec::deserialize(d)?;
        Ok(pairs
            .into_iter()
            .map(|[re, im]| Complex64::new(re, im))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sphere::{RhoTerm, SphereGrid};

    fn round(l: usize) -> Arc<SurfaceMetric> {
        Arc::new(SurfaceMetric::round(Arc::new(SphereGrid::new(l).unwrap())))
    }

    fn bumped(l: usize, c: f64) -> Arc<SurfaceMetric> {
        let g = Arc::new(SphereGrid::new(l).unwrap());
        Arc::new(SurfaceMetric::from_rho_terms(g, &[RhoTerm::from((1, 0, c))]).unwrap())
    }

    // ∫ |z₀|^{2(n-j)} |z₁|^{2j} dA_round = 4π j!(n-j)!/(n+1)!
    fn beta_oracle(n: usize, j: usize) -> f64 {
        let f = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
        4.0 * PI * f(j) * f(n - j) / f(n + 1)
    }

    #[test]
    fn round_weight_is_already_constant_curvature() {
        for n in 0..4 {
            let h = constant_curvature_weight(round(15), n).unwrap();
            assert!(h.weight_exponent().max_abs() < 1e-14);
            assert!((h.target_curvature() - 0.5 * n as f64).abs() < 1e-12);
        }
        let h = constant_curvature_weight(bumped(15, 0.3), 0).unwrap();
        assert!(h.weight_exponent().max_abs() < 1e-14);
    }

    #[test]
    fn bumped_weight_has_constant_curvature_and_topological_flux() {
        let h = constant_curvature_weight(bumped(31, 0.3), 1).unwrap();
        assert!(h.weight_exponent().max_abs() > 1e-3);
        assert!(h.curvature_defect() <= 1e-7 * (h.target_curvature() + 1.0));
        let flux = h.metric().integrate(&h.curvature()).unwrap();
        assert!((flux - 2.0 * PI).abs() < 1e-8);
        assert!(h.metric().integrate(h.weight_exponent()).unwrap().abs() < 1e-9);
    }

    #[test]
    fn gram_matches_beta_integrals() {
        for n in 0..4 {
            let h = constant_curvature_weight(round(15), n).unwrap();
            let g = h.gram_matrix();
            for j in 0..=n {
                for k in 0..=n {
                    let expected = if j == k { beta_oracle(n, j) } else { 0.0 };
                    assert!((g[(j, k)] - expected).norm() < 1e-12, "n={n} ({j},{k})");
                }
            }
        }
    }

    #[test]
    fn gram_is_hermitian_positive_definite_on_bumped_metric() {
        let h = constant_curvature_weight(bumped(23, 0.3), 3).unwrap();
        let g = h.gram_matrix();
        assert_eq!(g, &g.adjoint());
        let eig = nalgebra::SymmetricEigen::new(g.clone());
        assert!(eig.eigenvalues.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn north_pole_section() {
        let h = constant_curvature_weight(round(31), 1).unwrap();
        let d = Divisor::from_angles(&[(0.0, 0.0, 1)]).unwrap();
        let s = section_from_divisor(&d, &h).unwrap();
        assert!(s.coeffs()[0].norm() < 1e-15);
        assert!((s.coeffs()[1] - Complex64::new(1.0 / (2.0 * PI).sqrt(), 0.0)).norm() < 1e-12);
        let f = h.evaluate_norm(&s).unwrap();
        for (i, (theta, _)) in h.metric().grid().nodes().enumerate() {
            let expected = (0.5 * theta).sin().powi(2) / (2.0 * PI);
            assert!((f.values()[i] - expected).abs() < 1e-14);
        }

        let h2 = constant_curvature_weight(round(15), 2).unwrap();
        let d2 = Divisor::from_angles(&[(0.0, 0.0, 2)]).unwrap();
        let s2 = section_from_divisor(&d2, &h2).unwrap();
        assert!(s2.coeffs()[0].norm() < 1e-15 && s2.coeffs()[1].norm() < 1e-15);
        assert!(s2.coeffs()[2].im == 0.0 && s2.coeffs()[2].re > 0.0);
    }

    #[test]
    fn constant_section_norm() {
        let h = constant_curvature_weight(round(15), 0).unwrap();
        let s = section_from_divisor(&Divisor::empty(), &h).unwrap();
        let f = h.evaluate_norm(&s).unwrap();
        assert!(f
            .values()
            .iter()
            .all(|v| (v - 1.0 / (4.0 * PI)).abs() < 1e-14));
        assert!((h.gram_matrix()[(0, 0)].re - 4.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn degree_mismatch_is_rejected() {
        let h = constant_curvature_weight(round(7), 2).unwrap();
        let d = Divisor::from_angles(&[(1.0, 0.0, 1)]).unwrap();
        assert!(matches!(
            section_from_divisor(&d, &h),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn pointwise_norm_integrates_to_gram_form() {
        let h = constant_curvature_weight(bumped(23, 0.3), 2).unwrap();
        let s = Section::new(vec![
            Complex64::new(0.3, -0.2),
            Complex64::new(1.1, 0.4),
            Complex64::new(-0.5, 0.9),
        ]);
        let integral = h.metric().integrate(&h.evaluate_norm(&s).unwrap()).unwrap();
        assert!((integral - h.inner(&s, &s).re).abs() < 1e-10 * integral);
    }

    #[test]
    fn section_gradient_matches_finite_differences() {
        let h = constant_curvature_weight(round(7), 3).unwrap();
        let s = Section::new(vec![
            Complex64::new(0.3, -0.2),
            Complex64::new(1.1, 0.4),
            Complex64::new(-0.5, 0.9),
            Complex64::new(0.2, 0.0),
        ]);
        let (dt, dp) = h.evaluate_gradient(&s).unwrap();
        let step = 1e-6;
        for (i, (theta, phi)) in h.metric().grid().nodes().enumerate().step_by(7) {
            let fd_t = (s.eval_at(theta + step, phi) - s.eval_at(theta - step, phi)) / (2.0 * step);
            let fd_p = (s.eval_at(theta, phi + step) - s.eval_at(theta, phi - step))
                / (2.0 * step * theta.sin());
            assert!((fd_t - dt[i]).norm() < 1e-8);
            assert!((fd_p - dp[i]).norm() < 1e-8);
        }
    }

    #[test]
    fn alpha_estimates() {
        let h0 = constant_curvature_weight(round(31), 0).unwrap();
        let a0 = sup_norm_alpha(&h0, 100).unwrap().alpha;
        assert!((a0 - 1.0 / (4.0 * PI).sqrt()).abs() < 1e-12);

        let h1 = constant_curvature_weight(round(31), 1).unwrap();
        let a1 = sup_norm_alpha(&h1, 200).unwrap().alpha;
        let exact = 1.0 / (2.0 * PI).sqrt();
        assert!(a1 <= exact * (1.0 + 1e-12) && a1 > 0.99 * exact);

        let small = sup_norm_alpha(&h1, 100).unwrap().alpha;
        assert!(a1 >= small);
        assert!(sup_norm_alpha(&h1, 10).is_err());
    }
}
