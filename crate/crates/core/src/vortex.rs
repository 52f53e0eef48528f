//! Scalar reduction of the vortex equations.
//!
//! With `φ = √ε e^{u/2} φ̂_D` and `A = Â − ½ *du` the vortex system becomes
//! `Δu − ε/|Σ| + ε|φ̂_D|² e^u = 0`, solved here by damped Newton iteration in
//! the Galerkin (harmonic-coefficient) form of the equation multiplied by
//! `e^{2ρ}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::bundle::{section_from_divisor, Divisor, HermitianStructure, Section};
use crate::error::{Error, Result};
use crate::sphere::{helmholtz_galerkin, round_laplacian, GridFunction};

/// Stopping rules for [`solve_vortex_with`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct NewtonOptions {
    pub max_iterations: usize,
    pub residual_tol: f64,
    pub step_tol: f64,
    pub armijo: f64,
    pub min_damping: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            residual_tol: 1e-9,
            step_tol: 1e-10,
            armijo: 1e-4,
            min_damping: 1.0 / 1024.0,
        }
    }
}

/// A solved vortex in the scalar gauge.
#[derive(Clone, Debug, Serialize)]
pub struct VortexSolution {
    pub divisor: Divisor,
    pub eps: f64,
    pub tau: f64,
    #[serde(skip)]
    pub u: GridFunction,
    #[serde(skip)]
    pub u_coeffs: Vec<f64>,
    pub section: Section,
    /// Projected `L²_g` residual of the scalar equation.
    pub residual: f64,
    pub newton_iters: usize,
    /// `C⁰` norm of the last accepted Newton update.
    pub last_step: f64,
    /// `|ε ∫|φ̂|² e^u dA_g − ε|`.
    pub bradlow_residual: f64,
    pub residual_history: Vec<f64>,
    pub damping_history: Vec<f64>,
    #[serde(skip)]
    section_values: Vec<Complex64>,
    #[serde(skip)]
    phi_hat_sq: Vec<f64>,
}

impl VortexSolution {
    /// `P` of the normalised section at each node.
    pub fn section_values(&self) -> &[Complex64] {
        &self.section_values
    }

    /// `|φ̂_D|²_h` at each node.
    pub fn phi_hat_sq(&self) -> &[f64] {
        &self.phi_hat_sq
    }

    /// The same vortex described by `e^{ic} φ̂_D` in place of `φ̂_D`.
    pub fn with_phase(&self, c: f64) -> Self {
        let z = Complex64::from_polar(1.0, c);
        let mut out = self.clone();
        out.section = self.section.scaled(z);
        out.section_values.iter_mut().for_each(|v| *v *= z);
        out
    }

    /// `ε e^u` at each node.
    pub fn eps_exp_u(&self) -> Vec<f64> {
        self.u.values().iter().map(|u| self.eps * u.exp()).collect()
    }

    /// Linearisation potential `a = ε |φ̂|² e^u`.
    pub fn potential(&self) -> GridFunction {
        GridFunction::new(
            self.u
                .values()
                .iter()
                .zip(&self.phi_hat_sq)
                .map(|(u, p)| self.eps * p * u.exp())
                .collect(),
        )
    }
}

/// Reconstructed gauge-invariant fields.
#[derive(Clone, Debug)]
pub struct VortexFields {
    /// `|φ|_h = √ε e^{u/2} |φ̂_D|_h`.
    pub phi_norm: GridFunction,
    /// `*F_A = 2πn/|Σ| + Δu/2`.
    pub magnetic: GridFunction,
}

/// Distance of a vortex from its pseudo-vortex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PseudoVortexDeviation {
    pub field_dev: f64,
    pub curvature_dev: f64,
    pub u_c0: f64,
}

pub fn tau_for(eps: f64, degree: usize, area: f64) -> f64 {
    (4.0 * PI * degree as f64 + eps) / area
}

/// Solves the scalar vortex equation for divisor `d` with default options.
pub fn solve_vortex(d: &Divisor, eps: f64, h: &HermitianStructure) -> Result<VortexSolution> {
    solve_vortex_with(d, eps, h, &NewtonOptions::default())
}

pub fn solve_vortex_with(
    d: &Divisor,
    eps: f64,
    h: &HermitianStructure,
    opts: &NewtonOptions,
) -> Result<VortexSolution> {
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::Precondition(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    let section = section_from_divisor(d, h)?;
    let metric = h.metric();
    let grid = metric.grid();
    let section_values = h.evaluate(&section)?;
    let phi_hat_sq: Vec<f64> = h.evaluate_norm(&section)?.into_values();
    let area = metric.area();
    let source = eps / area;

    // Galerkin residual coefficients: K u + Π(e^{2ρ}(ε|φ̂|² e^u − ε/|Σ|)).
    let residual_coeffs = |u_values: &[f64], u_coeffs: &[f64]| -> Vec<f64> {
        let nodal: Vec<f64> = u_values
            .iter()
            .zip(&phi_hat_sq)
            .zip(metric.conformal())
            .map(|((u, p), c)| c * (eps * p * u.exp() - source))
            .collect();
        let mut r = grid.analyze(&nodal);
        for (ri, ki) in r.iter_mut().zip(round_laplacian(u_coeffs)) {
            *ri += ki;
        }
        r
    };

    let mut u_coeffs = vec![0.0; grid.coeff_count()];
    let mut u_values = vec![0.0; grid.node_count()];
    let mut r = residual_coeffs(&u_values, &u_coeffs);
    let mut res_norm = metric.residual_norm_of_coeffs(&r);
    let mut residual_history = vec![res_norm];
    let mut damping_history = Vec::new();
    let mut last_step = f64::INFINITY;
    let mut iters = 0;

    while !(res_norm <= opts.residual_tol && last_step <= opts.step_tol) {
        if iters >= opts.max_iterations {
            return Err(Error::Convergence {
                what: "vortex Newton iteration",
                iterations: iters,
                residual: res_norm,
            });
        }
        let c: Vec<f64> = u_values
            .iter()
            .zip(&phi_hat_sq)
            .zip(metric.conformal())
            .map(|((u, p), cf)| cf * eps * p * u.exp())
            .collect();
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        let (delta, _, _) = helmholtz_galerkin(metric, &c, &neg)?;
        let delta_values = grid.synthesize(&delta);
        let step_c0 = delta_values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

        let mut t = 1.0;
        loop {
            let trial_coeffs: Vec<f64> = u_coeffs
                .iter()
                .zip(&delta)
                .map(|(a, b)| a + t * b)
                .collect();
            let trial_values: Vec<f64> = u_values
                .iter()
                .zip(&delta_values)
                .map(|(a, b)| a + t * b)
                .collect();
            let trial_r = residual_coeffs(&trial_values, &trial_coeffs);
            let trial_norm = metric.residual_norm_of_coeffs(&trial_r);
            // Once at roundoff level the residual cannot decrease further.
            let at_floor = res_norm <= opts.residual_tol && trial_norm <= opts.residual_tol;
            if trial_norm <= (1.0 - opts.armijo * t) * res_norm || at_floor {
                u_coeffs = trial_coeffs;
                u_values = trial_values;
                r = trial_r;
                res_norm = trial_norm;
                last_step = t * step_c0;
                break;
            }
            t *= 0.5;
            if t < opts.min_damping {
                return Err(Error::Convergence {
                    what: "vortex Newton line search",
                    iterations: iters,
                    residual: res_norm,
                });
            }
        }
        iters += 1;
        residual_history.push(res_norm);
        damping_history.push(t);
    }

    let integral: f64 = metric.integrate_slice(
        &u_values
            .iter()
            .zip(&phi_hat_sq)
            .map(|(u, p)| p * u.exp())
            .collect::<Vec<_>>(),
    );
    let bradlow_residual = (eps * integral - eps).abs();
    if bradlow_residual > 1e-8 * eps {
        return Err(Error::Numeric(format!(
            "Bradlow identity violated: |‖φ‖² − ε| = {bradlow_residual:.3e} at eps = {eps}"
        )));
    }

    Ok(VortexSolution {
        divisor: d.clone(),
        eps,
        tau: tau_for(eps, h.degree(), area),
        u: GridFunction::new(u_values),
        u_coeffs,
        section,
        residual: res_norm,
        newton_iters: iters,
        last_step,
        bradlow_residual,
        residual_history,
        damping_history,
        section_values,
        phi_hat_sq,
    })
}

pub fn reconstruct_fields(s: &VortexSolution, h: &HermitianStructure) -> VortexFields {
    let metric = h.metric();
    let phi_norm = GridFunction::new(
        s.u.values()
            .iter()
            .zip(&s.phi_hat_sq)
            .map(|(u, p)| (s.eps * p).sqrt() * (0.5 * u).exp())
            .collect(),
    );
    let lap = metric.laplace_of_coeffs(&s.u_coeffs);
    let background = h.target_curvature();
    let magnetic = lap.map(|l| background + 0.5 * l);
    VortexFields { phi_norm, magnetic }
}

/// `‖*F_A − (τ − |φ|²)/2‖_{L²}`, the second vortex equation.
pub fn second_equation_residual(s: &VortexSolution, h: &HermitianStructure) -> f64 {
    let f = reconstruct_fields(s, h);
    let r: Vec<f64> = f
        .magnetic
        .values()
        .iter()
        .zip(f.phi_norm.values())
        .map(|(b, p)| b - 0.5 * (s.tau - p * p))
        .collect();
    h.metric().inner_slice(&r, &r).sqrt()
}

/// Yang–Mills–Higgs energy `∫ ½|d_Aφ|² + ½|F_A|² + ⅛(τ − |φ|²)²`.
///
/// For a vortex `d_Aφ` is determined by `|φ|`, with
/// `|d_Aφ|² = ½ |d|φ|²|² / |φ|²`.
pub fn energy(s: &VortexSolution, h: &HermitianStructure) -> Result<f64> {
    let metric = h.metric();
    let grid = metric.grid();
    let fields = reconstruct_fields(s, h);
    let w_coeffs = grid.analyze(h.weight_exponent().values());
    let (du_t, du_p) = (
        grid.synthesize_dtheta(&s.u_coeffs),
        grid.synthesize_dphi_over_sin(&s.u_coeffs),
    );
    let (dw_t, dw_p) = (
        grid.synthesize_dtheta(&w_coeffs),
        grid.synthesize_dphi_over_sin(&w_coeffs),
    );
    let (dp_t, dp_p) = h.evaluate_gradient(&s.section)?;
    let fibre = h.fibre_weight();
    let round_w = grid.weights();
    let area_w = metric.area_weights();

    let mut kinetic = 0.0;
    let mut potential = 0.0;
    for i in 0..grid.node_count() {
        let p = s.section_values[i];
        let q = s.eps * s.u.values()[i].exp() * fibre[i] * p.norm_sqr();
        let scale = s.eps * s.u.values()[i].exp() * fibre[i];
        let grad_t = q * (du_t[i] - 2.0 * dw_t[i]) + scale * 2.0 * (p.conj() * dp_t[i]).re;
        let grad_p = q * (du_p[i] - 2.0 * dw_p[i]) + scale * 2.0 * (p.conj() * dp_p[i]).re;
        if q > 0.0 {
            // |d_Aφ|² |dA| is conformally invariant, so round quantities suffice.
            kinetic += 0.5 * 0.5 * (grad_t * grad_t + grad_p * grad_p) / q * round_w[i];
        }
        let b = fields.magnetic.values()[i];
        potential += (0.5 * b * b + 0.125 * (s.tau - q) * (s.tau - q)) * area_w[i];
    }
    Ok(kinetic + potential)
}

pub fn pseudo_vortex_deviation(
    s: &VortexSolution,
    h: &HermitianStructure,
) -> Result<PseudoVortexDeviation> {
    let metric = h.metric();
    let field_dev =
        s.u.values()
            .iter()
            .zip(&s.phi_hat_sq)
            .map(|(u, p)| ((0.5 * u).exp() - 1.0).abs() * p.sqrt())
            .fold(0.0, f64::max);
    let curvature_dev = 0.5 * metric.laplace_of_coeffs(&s.u_coeffs).max_abs();
    let u_c0 = metric.norms(&s.u)?.c0;
    Ok(PseudoVortexDeviation {
        field_dev,
        curvature_dev,
        u_c0,
    })
}

/// `∫ *F_A dA_g`, which is `2πn`.
pub fn flux(s: &VortexSolution, h: &HermitianStructure) -> Result<f64> {
    h.metric().integrate(&reconstruct_fields(s, h).magnetic)
}
