//! Tangent frames on the moduli space and the normalised `L²` metric.
//!
//! A tangent vector at a moduli point is represented by a horizontal section
//! variation `ψ = φ̂̇` (real-orthogonal to `φ̂` and `iφ̂`). Each such direction
//! drives two linear problems for `u̇` and `χ̇`, and the `L²` metric is the
//! polarised quadratic form built from the three of them.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::bundle::{HermitianStructure, Section};
use crate::error::{Error, Result};
use crate::sphere::{dirichlet_of_coeffs, solve_helmholtz, GridFunction, SurfaceMetric};
use crate::vortex::VortexSolution;

/// Real inner product `Re(aᴴ M b)` on coefficient vectors.
pub fn real_inner(gram: &DMatrix<Complex64>, a: &[Complex64], b: &[Complex64]) -> f64 {
    let k = a.len();
    let mut total = Complex64::new(0.0, 0.0);
    for j in 0..k {
        let mut row = Complex64::new(0.0, 0.0);
        for l in 0..k {
            row += gram[(j, l)] * b[l];
        }
        total += a[j].conj() * row;
    }
    total.re
}

fn hermitian_inner(gram: &DMatrix<Complex64>, a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut total = Complex64::new(0.0, 0.0);
    for j in 0..a.len() {
        for l in 0..b.len() {
            total += a[j].conj() * gram[(j, l)] * b[l];
        }
    }
    total
}

/// `2n` real-orthonormal horizontal directions at a unit section.
#[derive(Clone, Debug, Serialize)]
pub struct TangentFrame {
    pub base: Section,
    pub directions: Vec<Section>,
    #[serde(skip)]
    gram: DMatrix<Complex64>,
}

impl TangentFrame {
    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn gram(&self) -> &DMatrix<Complex64> {
        &self.gram
    }

    /// Components `Re⟨ψ_i, v⟩` of a horizontal vector in the frame.
    pub fn components(&self, v: &Section) -> Vec<f64> {
        self.directions
            .iter()
            .map(|d| real_inner(&self.gram, d.coeffs(), v.coeffs()))
            .collect()
    }

    /// Largest violation of horizontality and orthonormality.
    pub fn orthonormality_defect(&self) -> f64 {
        let base = self.base.coeffs();
        let i_base: Vec<Complex64> = base.iter().map(|c| c * Complex64::i()).collect();
        let mut worst = 0.0f64;
        for (i, a) in self.directions.iter().enumerate() {
            worst = worst.max(real_inner(&self.gram, a.coeffs(), base).abs());
            worst = worst.max(real_inner(&self.gram, a.coeffs(), &i_base).abs());
            for (j, b) in self.directions.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((real_inner(&self.gram, a.coeffs(), b.coeffs()) - target).abs());
            }
        }
        worst
    }

    /// The frame at `e^{ic} φ̂` obtained by rotating every element.
    pub fn rotated(&self, phase: f64) -> TangentFrame {
        let z = Complex64::from_polar(1.0, phase);
        TangentFrame {
            base: self.base.scaled(z),
            directions: self.directions.iter().map(|d| d.scaled(z)).collect(),
            gram: self.gram.clone(),
        }
    }
}

fn subtract_projection(gram: &DMatrix<Complex64>, v: &mut [Complex64], onto: &[Complex64]) {
    let c = real_inner(gram, onto, v);
    for (x, o) in v.iter_mut().zip(onto) {
        *x -= c * o;
    }
}

/// Real Gram–Schmidt against `{φ̂, iφ̂}` over the candidates
/// `e_0, i e_0, e_1, i e_1, …`.
pub fn horizontal_basis(phi_hat: &Section, gram: &DMatrix<Complex64>) -> Result<TangentFrame> {
    let k = phi_hat.coeffs().len();
    if gram.nrows() != k || gram.ncols() != k {
        return Err(Error::Dimension {
            expected: k,
            found: gram.nrows(),
        });
    }
    let norm = real_inner(gram, phi_hat.coeffs(), phi_hat.coeffs()).sqrt();
    if (norm - 1.0).abs() > 1e-8 {
        return Err(Error::Precondition(format!(
            "base section must have unit L² norm, found {norm}"
        )));
    }
    let base = phi_hat.coeffs().to_vec();
    let i_base: Vec<Complex64> = base.iter().map(|c| c * Complex64::i()).collect();
    let mut accepted: Vec<Vec<Complex64>> = vec![base.clone(), i_base];
    let degree = k - 1;
    for j in 0..k {
        for unit in [Complex64::new(1.0, 0.0), Complex64::i()] {
            if accepted.len() == 2 + 2 * degree {
                break;
            }
            let mut v = vec![Complex64::new(0.0, 0.0); k];
            v[j] = unit;
            let start = real_inner(gram, &v, &v).sqrt();
            for _ in 0..2 {
                for a in &accepted {
                    subtract_projection(gram, &mut v, a);
                }
            }
            let len = real_inner(gram, &v, &v).sqrt();
            if len > 1e-6 * start {
                accepted.push(v.iter().map(|c| c / len).collect());
            }
        }
    }
    if accepted.len() != 2 + 2 * degree {
        return Err(Error::Numeric(format!(
            "horizontal frame has rank {} instead of {}",
            accepted.len() - 2,
            2 * degree
        )));
    }
    Ok(TangentFrame {
        base: phi_hat.clone(),
        directions: accepted.into_iter().skip(2).map(Section::new).collect(),
        gram: gram.clone(),
    })
}

/// Removes the `φ̂` and `iφ̂` components of a coefficient variation.
pub fn horizontal_lift(frame: &TangentFrame, coeff_dir: &Section) -> Result<Section> {
    let gram = frame.gram();
    let mut v = coeff_dir.coeffs().to_vec();
    let base = frame.base.coeffs();
    let i_base: Vec<Complex64> = base.iter().map(|c| c * Complex64::i()).collect();
    let before = real_inner(gram, &v, &v).sqrt();
    for _ in 0..2 {
        subtract_projection(gram, &mut v, base);
        subtract_projection(gram, &mut v, &i_base);
    }
    let after = real_inner(gram, &v, &v).sqrt();
    if before == 0.0 || after <= 1e-10 * before {
        return Err(Error::DegenerateDirection(
            "direction is vertical (tangent to the phase orbit)".into(),
        ));
    }
    Ok(Section::new(v))
}

/// Solutions `u̇`, `χ̇` of the driven linear problems for one direction.
#[derive(Clone, Debug)]
pub struct LinearizedResponse {
    pub u_dot: GridFunction,
    pub chi_dot: GridFunction,
    pub u_dot_coeffs: Vec<f64>,
    pub chi_dot_coeffs: Vec<f64>,
    pub a: GridFunction,
    pub b_u: GridFunction,
    pub b_chi: GridFunction,
    pub residual_u: f64,
    /// Residual of the gauge-orthogonality equation.
    pub residual_chi: f64,
    direction_values: Vec<Complex64>,
}

impl LinearizedResponse {
    pub fn direction_values(&self) -> &[Complex64] {
        &self.direction_values
    }
}

/// Solves `Δχ̇ + aχ̇ = −ε e^u Re h(iφ̂, ψ)` and `Δu̇ + au̇ = −2ε e^u Re h(φ̂, ψ)`.
pub fn solve_linearized(
    s: &VortexSolution,
    dir: &Section,
    h: &HermitianStructure,
) -> Result<LinearizedResponse> {
    let metric = h.metric();
    let psi = h.evaluate(dir)?;
    let a = s.potential();
    let eu = s.eps_exp_u();
    let fibre = h.fibre_weight();
    let phi = s.section_values();
    let mut b_u = Vec::with_capacity(psi.len());
    let mut b_chi = Vec::with_capacity(psi.len());
    for i in 0..psi.len() {
        let pair = phi[i] * psi[i].conj() * fibre[i];
        // Re h(iφ̂, ψ) = Re(i φ̂ ψ̄) = −Im(φ̂ ψ̄)
        b_chi.push(eu[i] * pair.im);
        b_u.push(-2.0 * eu[i] * pair.re);
    }
    let (b_u, b_chi) = (GridFunction::new(b_u), GridFunction::new(b_chi));
    let su = solve_helmholtz(&a, &b_u, metric)?;
    let sc = solve_helmholtz(&a, &b_chi, metric)?;
    Ok(LinearizedResponse {
        u_dot: su.solution,
        chi_dot: sc.solution,
        u_dot_coeffs: su.coeffs,
        chi_dot_coeffs: sc.coeffs,
        a,
        b_u,
        b_chi,
        residual_u: su.residual,
        residual_chi: sc.residual,
        direction_values: psi,
    })
}

/// Normalised `L²` metric in a horizontal frame at one moduli point.
#[derive(Clone, Debug, Serialize)]
pub struct MetricSample {
    pub eps: f64,
    pub degree: usize,
    /// `g/ε` in the frame.
    #[serde(serialize_with = "serialize_matrix")]
    pub g_eps: DMatrix<f64>,
    /// Leading-order part `∫ e^u Re h(ψ_i, ψ_j)` of `g/ε`.
    #[serde(serialize_with = "serialize_matrix")]
    pub g_leading: DMatrix<f64>,
    pub deviation: f64,
    pub min_eig: f64,
    pub max_eig: f64,
    pub gauge_residual_max: f64,
    pub linear_residual_max: f64,
    pub asymmetry: f64,
    /// `(g_ε(ψ_i, ψ_i), g₀(ψ_i, ψ_i))` per frame direction.
    pub direction_pairs: Vec<(f64, f64)>,
}

fn serialize_matrix<S: serde::Serializer>(
    m: &DMatrix<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    let rows: Vec<Vec<f64>> = (0..m.nrows())
        .map(|r| m.row(r).iter().copied().collect())
        .collect();
    serde::Serialize::serialize(&rows, s)
}

/// Assembles `G_ε = g/ε` on the frame by polarisation of the quadratic form
/// `ε∫e^u{|ψ|² + Re h(ψ,φ̂)u̇ + 2Re h(ψ,iφ̂)χ̇ + |φ̂|²(u̇²/4 + χ̇²)} + ¼‖du̇‖² + ‖dχ̇‖²`.
pub fn assemble_metric(
    s: &VortexSolution,
    frame: &TangentFrame,
    h: &HermitianStructure,
) -> Result<MetricSample> {
    let dim = frame.len();
    let responses = frame
        .directions
        .iter()
        .map(|d| solve_linearized(s, d, h))
        .collect::<Result<Vec<_>>>()?;
    let (g, lead) = polarised_form(s, &responses, h.metric(), h.fibre_weight());
    let g_eps = g / s.eps;
    let mut asymmetry = 0.0f64;
    for i in 0..dim {
        for j in 0..dim {
            asymmetry = asymmetry.max((g_eps[(i, j)] - g_eps[(j, i)]).abs());
        }
    }
    let sym = (&g_eps + g_eps.transpose()) * 0.5;
    let (min_eig, max_eig, deviation) = if dim == 0 {
        (1.0, 1.0, 0.0)
    } else {
        let eig = SymmetricEigen::new(sym.clone());
        let min = eig.eigenvalues.min();
        let max = eig.eigenvalues.max();
        (min, max, (max - 1.0).abs().max((min - 1.0).abs()))
    };
    if dim > 0 && !(min_eig > 0.0) {
        return Err(Error::Numeric(format!(
            "assembled metric is not positive definite (min eigenvalue {min_eig:.3e})"
        )));
    }
    let gauge_residual_max = responses.iter().fold(0.0f64, |m, r| m.max(r.residual_chi));
    let linear_residual_max = responses
        .iter()
        .fold(0.0f64, |m, r| m.max(r.residual_chi).max(r.residual_u));
    Ok(MetricSample {
        eps: s.eps,
        degree: dim / 2,
        direction_pairs: (0..dim).map(|i| (g_eps[(i, i)], 1.0)).collect(),
        g_eps: sym,
        g_leading: lead,
        deviation,
        min_eig,
        max_eig,
        gauge_residual_max,
        linear_residual_max,
        asymmetry,
    })
}

fn polarised_form(
    s: &VortexSolution,
    responses: &[LinearizedResponse],
    metric: &SurfaceMetric,
    fibre: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let dim = responses.len();
    let eu = s.eps_exp_u();
    let phi = s.section_values();
    let phi_sq = s.phi_hat_sq();
    let nodes = phi.len();
    // Re h(ψ_i, φ̂) and Re h(ψ_i, iφ̂) at each node.
    let mut with_phi = vec![vec![0.0; nodes]; dim];
    let mut with_iphi = vec![vec![0.0; nodes]; dim];
    for (r, resp) in responses.iter().enumerate() {
        for i in 0..nodes {
            let pair = resp.direction_values[i] * phi[i].conj() * fibre[i];
            with_phi[r][i] = pair.re;
            // Re(ψ conj(iφ̂)) = Re(−i ψ φ̂̄) = Im(ψ φ̂̄)
            with_iphi[r][i] = pair.im;
        }
    }
    let mut g = DMatrix::<f64>::zeros(dim, dim);
    let mut lead = DMatrix::<f64>::zeros(dim, dim);
    let mut integrand = vec![0.0; nodes];
    let mut leading = vec![0.0; nodes];
    for i in 0..dim {
        for j in i..dim {
            let (ri, rj) = (&responses[i], &responses[j]);
            let (ui, uj) = (ri.u_dot.values(), rj.u_dot.values());
            let (ci, cj) = (ri.chi_dot.values(), rj.chi_dot.values());
            for k in 0..nodes {
                let hh = (ri.direction_values[k] * rj.direction_values[k].conj()).re * fibre[k];
                leading[k] = eu[k] * hh;
                integrand[k] = eu[k]
                    * (hh
                        + 0.5 * (with_phi[i][k] * uj[k] + with_phi[j][k] * ui[k])
                        + (with_iphi[i][k] * cj[k] + with_iphi[j][k] * ci[k])
                        + phi_sq[k] * (0.25 * ui[k] * uj[k] + ci[k] * cj[k]));
            }
            let dirichlet = 0.25 * dirichlet_pair(&ri.u_dot_coeffs, &rj.u_dot_coeffs)
                + dirichlet_pair(&ri.chi_dot_coeffs, &rj.chi_dot_coeffs);
            let value = metric.integrate_slice(&integrand) + dirichlet;
            let lead_value = metric.integrate_slice(&leading) / s.eps;
            g[(i, j)] = value;
            g[(j, i)] = value;
            lead[(i, j)] = lead_value;
            lead[(j, i)] = lead_value;
        }
    }
    (g, lead)
}

fn dirichlet_pair(a: &[f64], b: &[f64]) -> f64 {
    // ⟨da, db⟩ by polarisation of the diagonal Dirichlet form
    let sum: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    let diff: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    0.25 * (dirichlet_of_coeffs(&sum) - dirichlet_of_coeffs(&diff))
}

/// Submersion Fubini–Study quadratic form
/// `(‖ψ̇‖²‖ψ‖² − |⟨ψ̇,ψ⟩|²)/‖ψ‖⁴` for a possibly unnormalised path.
pub fn fs_metric_coeff(psi: &Section, psi_dot: &Section, gram: &DMatrix<Complex64>) -> Result<f64> {
    let nn = hermitian_inner(gram, psi.coeffs(), psi.coeffs()).re;
    if !(nn > 0.0) {
        return Err(Error::Precondition(
            "Fubini–Study form needs a nonzero section".into(),
        ));
    }
    let vv = hermitian_inner(gram, psi_dot.coeffs(), psi_dot.coeffs()).re;
    let cross = hermitian_inner(gram, psi_dot.coeffs(), psi.coeffs()).norm_sqr();
    Ok((vv * nn - cross) / (nn * nn))
}

/// Outcome of one evaluation of the explicit `H¹` bound for `Δv + av = b`.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct LaxMilgramCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub constant: f64,
    pub lambda1: f64,
    pub satisfied: bool,
}

/// Solves `Δv + av = b` and compares `‖v‖_{H¹}` with
/// `C{(1 + ‖a‖/∫a)(‖b‖ + (‖a‖/∫a)|∫b|) + |∫b|/∫a}`,
/// `C = (1 + 1/λ₁) max(1, √|M|)`.
pub fn lax_milgram_check(
    a: &GridFunction,
    b: &GridFunction,
    m: &SurfaceMetric,
) -> Result<LaxMilgramCheck> {
    let v = solve_helmholtz(a, b, m)?;
    let lhs = m.norms(&v.solution)?.h1;
    let lambda1 = m.lambda1()?;
    let constant = (1.0 + 1.0 / lambda1) * m.area().sqrt().max(1.0);
    let a_l2 = m.l2_norm(a)?;
    let a_int = m.integrate(a)?;
    let b_l2 = m.l2_norm(b)?;
    let b_int = m.integrate(b)?.abs();
    let ratio = a_l2 / a_int;
    let rhs = constant * ((1.0 + ratio) * (b_l2 + ratio * b_int) + b_int / a_int);
    Ok(LaxMilgramCheck {
        lhs,
        rhs,
        constant,
        lambda1,
        satisfied: lhs <= rhs * (1.0 + 1e-6),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundle::{constant_curvature_weight, section_from_divisor, Divisor};
    use crate::sphere::{RhoTerm, SphereGrid};
    use crate::vortex::solve_vortex;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn structure(l: usize, rho: &[RhoTerm], n: usize) -> HermitianStructure {
        let g = Arc::new(SphereGrid::new(l).unwrap());
        let m = Arc::new(SurfaceMetric::from_rho_terms(g, rho).unwrap());
        constant_curvature_weight(m, n).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn round_degree_one_frame() {
        let h = structure(15, &[], 1);
        let phi = Section::new(vec![c(0.0, 0.0), c(1.0 / (2.0 * PI).sqrt(), 0.0)]);
        let frame = horizontal_basis(&phi, h.gram_matrix()).unwrap();
        assert_eq!(frame.len(), 2);
        assert!(frame.orthonormality_defect() < 1e-12);
        let r = 1.0 / (2.0 * PI).sqrt();
        assert!((frame.directions[0].coeffs()[0] - c(r, 0.0)).norm() < 1e-12);
        assert!((frame.directions[1].coeffs()[0] - c(0.0, r)).norm() < 1e-12);
        assert!(frame
            .directions
            .iter()
            .all(|d| d.coeffs()[1].norm() < 1e-12));
    }

    fn projector(frame: &TangentFrame) -> DMatrix<f64> {
        // real 2k×2k projector in the M-orthonormal sense, via coordinates
        let k = frame.base.coeffs().len();
        let mut p = DMatrix::<f64>::zeros(2 * k, 2 * k);
        for d in &frame.directions {
            let x: Vec<f64> = d.coeffs().iter().flat_map(|z| [z.re, z.im]).collect();
            for a in 0..2 * k {
                for b in 0..2 * k {
                    p[(a, b)] += x[a] * x[b];
                }
            }
        }
        p
    }

    #[test]
    fn frame_depends_only_on_the_phase_orbit() {
        let h = structure(15, &[RhoTerm::from((1, 0, 0.3))], 3);
        let d = Divisor::from_angles(&[(0.4, 0.1, 1), (1.9, 2.0, 1), (2.7, -1.0, 1)]).unwrap();
        let phi = section_from_divisor(&d, &h).unwrap();
        let f1 = horizontal_basis(&phi, h.gram_matrix()).unwrap();
        let f2 = horizontal_basis(
            &phi.scaled(Complex64::from_polar(1.0, 0.83)),
            h.gram_matrix(),
        )
        .unwrap();
        assert_eq!(f1.len(), 6);
        assert!(f1.orthonormality_defect() < 1e-10);
        assert!(f2.orthonormality_defect() < 1e-10);
        let diff = (projector(&f1) - projector(&f2)).abs().max();
        assert!(diff < 1e-10, "{diff}");
    }

    #[test]
    fn lift_removes_vertical_parts() {
        let h = structure(15, &[RhoTerm::from((2, 1, 0.2))], 2);
        let d = Divisor::from_angles(&[(0.4, 0.1, 1), (1.9, 2.0, 1)]).unwrap();
        let phi = section_from_divisor(&d, &h).unwrap();
        let frame = horizontal_basis(&phi, h.gram_matrix()).unwrap();
        assert!(matches!(
            horizontal_lift(&frame, &phi),
            Err(Error::DegenerateDirection(_))
        ));
        let psi = &frame.directions[0];
        let same = horizontal_lift(&frame, psi).unwrap();
        assert!(same
            .coeffs()
            .iter()
            .zip(psi.coeffs())
            .all(|(a, b)| (a - b).norm() < 1e-12));
        let mixed = psi.axpy(c(0.5, 0.0), &phi).axpy(c(0.0, 0.3), &phi);
        let lifted = horizontal_lift(&frame, &mixed).unwrap();
        assert!(lifted
            .coeffs()
            .iter()
            .zip(psi.coeffs())
            .all(|(a, b)| (a - b).norm() < 1e-10));
    }

    #[test]
    fn fs_form_values() {
        let h = structure(15, &[RhoTerm::from((1, 1, 0.2))], 2);
        let d = Divisor::from_angles(&[(1.0, 0.3, 2)]).unwrap();
        let phi = section_from_divisor(&d, &h).unwrap();
        let frame = horizontal_basis(&phi, h.gram_matrix()).unwrap();
        let gram = h.gram_matrix();
        assert!(fs_metric_coeff(&phi, &phi, gram).unwrap().abs() < 1e-10);
        for psi in &frame.directions {
            assert!((fs_metric_coeff(&phi, psi, gram).unwrap() - 1.0).abs() < 1e-10);
            let z = c(-1.7, 0.4);
            let scaled = fs_metric_coeff(&phi.scaled(z), &psi.scaled(z), gram).unwrap();
            assert!((scaled - 1.0).abs() < 1e-10);
        }
        assert!(fs_metric_coeff(&Section::zero(2), &phi, gram).is_err());
    }

    #[test]
    fn zero_direction_has_zero_response() {
        let h = structure(15, &[], 1);
        let d = Divisor::from_angles(&[(0.5, 0.5, 1)]).unwrap();
        let s = solve_vortex(&d, 0.2, &h).unwrap();
        let r = solve_linearized(&s, &Section::zero(1), &h).unwrap();
        assert_eq!(r.u_dot.max_abs(), 0.0);
        assert_eq!(r.chi_dot.max_abs(), 0.0);
    }

    #[test]
    fn axial_responses_are_axial() {
        let h = structure(23, &[], 1);
        let d = Divisor::from_angles(&[(0.0, 0.0, 1)]).unwrap();
        let s = solve_vortex(&d, 0.2, &h).unwrap();
        let frame = horizontal_basis(&s.section, h.gram_matrix()).unwrap();
        for dir in &frame.directions {
            let r = solve_linearized(&s, dir, &h).unwrap();
            assert!(r.residual_u < 1e-9 && r.residual_chi < 1e-9);
            assert!(r.a.values().iter().all(|v| *v >= 0.0));
        }
        // No horizontal direction is itself axial here, but the pair (ψ₁, ψ₂)
        // is rotated into itself, so the summed squared responses are axial.
        let r1 = solve_linearized(&s, &frame.directions[0], &h).unwrap();
        let r2 = solve_linearized(&s, &frame.directions[1], &h).unwrap();
        let np = h.metric().grid().n_phi();
        let energy: Vec<f64> = (0..r1.u_dot.len())
            .map(|i| {
                r1.u_dot.values()[i].powi(2)
                    + r2.u_dot.values()[i].powi(2)
                    + r1.chi_dot.values()[i].powi(2)
                    + r2.chi_dot.values()[i].powi(2)
            })
            .collect();
        for ring in energy.chunks(np) {
            let mean = ring.iter().sum::<f64>() / np as f64;
            let var = ring.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / np as f64;
            assert!(var <= 1e-9);
        }
    }

    #[test]
    fn metric_sample_on_round_sphere() {
        let h = structure(31, &[], 1);
        let d = Divisor::from_angles(&[(0.0, 0.0, 1)]).unwrap();
        let s = solve_vortex(&d, 0.1, &h).unwrap();
        let frame = horizontal_basis(&s.section, h.gram_matrix()).unwrap();
        let m = assemble_metric(&s, &frame, &h).unwrap();
        assert!(m.asymmetry <= 1e-9);
        assert!(m.gauge_residual_max <= 1e-9);
        assert!(m.min_eig > 0.0);
        assert!(m.deviation < 0.1);
    }

    #[test]
    fn phase_rotation_leaves_metric_unchanged() {
        let h = structure(23, &[RhoTerm::from((1, 0, 0.3))], 2);
        let d = Divisor::from_angles(&[(0.4, 0.1, 1), (1.9, 2.0, 1)]).unwrap();
        let s = solve_vortex(&d, 0.2, &h).unwrap();
        let frame = horizontal_basis(&s.section, h.gram_matrix()).unwrap();
        let base = assemble_metric(&s, &frame, &h).unwrap();
        let rotated_s = s.with_phase(1.1);
        let rotated = assemble_metric(&rotated_s, &frame.rotated(1.1), &h).unwrap();
        let diff = (&base.g_eps - &rotated.g_eps).abs().max();
        assert!(diff <= 1e-9, "{diff}");
    }

    #[test]
    fn lax_milgram_closed_forms() {
        let g = Arc::new(SphereGrid::new(15).unwrap());
        let m = SurfaceMetric::round(g.clone());
        let a = GridFunction::constant(&g, 1.0);
        let y10 = GridFunction::harmonic(&g, 1, 0);
        let check = lax_milgram_check(&a, &y10.scaled(3.0), &m).unwrap();
        assert!((check.lhs - 3f64.sqrt()).abs() < 1e-10);
        assert!(check.satisfied);
        let zero = lax_milgram_check(&a, &GridFunction::constant(&g, 0.0), &m).unwrap();
        assert_eq!(zero.lhs, 0.0);
        assert!(zero.satisfied);
        let expected_c = (1.0 + 0.5) * (4.0 * PI).sqrt();
        assert!((check.constant - expected_c).abs() < 1e-8);
    }
}
