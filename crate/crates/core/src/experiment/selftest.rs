use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use serde::Serialize;

use super::output::{num, Table};
use super::{Experiment, Outcome, RunContext, RunError};
use crate::bundle::{
    constant_curvature_weight, polynomial_from_divisor, section_from_divisor, sup_norm_alpha,
    Divisor, HermitianStructure, Section,
};
use crate::error::{Error, Result};
use crate::fit::fit_convergence_order;
use crate::moduli::{
    assemble_metric, fs_metric_coeff, horizontal_basis, horizontal_lift, lax_milgram_check,
    solve_linearized,
};
use crate::spectral::{laplace_spectrum, moduli_metric_field, ratio_bounds, ModuliMetricField};
use crate::sphere::{
    solve_helmholtz, solve_poisson, GridFunction, RhoTerm, SphereGrid, SurfaceMetric,
};
use crate::vortex::{
    flux, pseudo_vortex_deviation, reconstruct_fields, second_equation_residual, solve_vortex,
};

/// Outcome of one closed-form check.
#[derive(Clone, Debug, Serialize)]
pub struct SelfTestCheck {
    pub name: &'static str,
    pub passed: bool,
    /// The measured discrepancy (0 when exact).
    pub value: f64,
    pub tolerance: f64,
}

const L: usize = 15;

fn round() -> SurfaceMetric {
    SurfaceMetric::round(Arc::new(SphereGrid::new(L).unwrap()))
}

fn structure(rho: &[RhoTerm], n: usize) -> Result<HermitianStructure> {
    let g = Arc::new(SphereGrid::new(L)?);
    constant_curvature_weight(Arc::new(SurfaceMetric::from_rho_terms(g, rho)?), n)
}

fn diff(a: &GridFunction, b: &GridFunction) -> f64 {
    a.values()
        .iter()
        .zip(b.values())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

fn y(m: &SurfaceMetric, l: usize, mm: i64) -> GridFunction {
    GridFunction::harmonic(m.grid(), l, mm)
}

fn combine(a: &GridFunction, sa: f64, b: &GridFunction, sb: f64) -> GridFunction {
    a.zip_map(b, |x, z| sa * x + sb * z)
}

fn longitudinal_variance(grid: &SphereGrid, f: &[f64]) -> f64 {
    f.chunks(grid.n_phi())
        .map(|ring| {
            let mean = ring.iter().sum::<f64>() / ring.len() as f64;
            ring.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / ring.len() as f64
        })
        .fold(0.0, f64::max)
}

type Check = (&'static str, f64, fn() -> Result<f64>);

fn checks() -> Vec<Check> {
    vec![
        ("integrate_one_round", 1e-12, || {
            Ok((round().integrate(&GridFunction::constant(round().grid(), 1.0))? - 4.0 * PI).abs())
        }),
        ("integrate_y10_round", 1e-12, || {
            let m = round();
            Ok(m.integrate(&y(&m, 1, 0))?.abs())
        }),
        ("laplace_y10", 1e-10, || {
            let m = round();
            let f = y(&m, 1, 0);
            Ok(diff(&m.laplace_beltrami(&f)?, &f.scaled(2.0)))
        }),
        ("laplace_constant", 1e-10, || {
            let m = round();
            Ok(m.laplace_beltrami(&GridFunction::constant(m.grid(), 3.0))?
                .max_abs())
        }),
        ("poisson_eigenfunction", 1e-10, || {
            let m = round();
            let f = y(&m, 1, 0);
            Ok(diff(&solve_poisson(&f.scaled(2.0), &m)?.solution, &f))
        }),
        ("poisson_zero", 0.0, || {
            let m = round();
            Ok(solve_poisson(&GridFunction::constant(m.grid(), 0.0), &m)?
                .solution
                .max_abs())
        }),
        ("poisson_linearity", 1e-10, || {
            let m = round();
            let (a, b) = (y(&m, 2, 0), y(&m, 1, 1));
            let v = solve_poisson(&combine(&a, 6.0, &b, 2.0), &m)?.solution;
            Ok(diff(&v, &combine(&a, 1.0, &b, 1.0)))
        }),
        ("helmholtz_eigen_case", 1e-10, || {
            let m = round();
            let f = y(&m, 1, 0);
            let one = GridFunction::constant(m.grid(), 1.0);
            Ok(diff(
                &solve_helmholtz(&one, &f.scaled(3.0), &m)?.solution,
                &f,
            ))
        }),
        ("helmholtz_constant", 1e-10, || {
            let m = round();
            let one = GridFunction::constant(m.grid(), 1.0);
            let c = GridFunction::constant(m.grid(), 0.7);
            Ok(diff(&solve_helmholtz(&one, &c, &m)?.solution, &c))
        }),
        ("lambda1_round", 1e-9, || {
            Ok((round().lambda1()? - 2.0).abs())
        }),
        ("lambda1_scaled", 1e-9, || {
            let c = 0.3;
            let g = Arc::new(SphereGrid::new(L)?);
            let m =
                SurfaceMetric::from_rho_terms(g, &[RhoTerm::from((0, 0, c * (4.0 * PI).sqrt()))])?;
            Ok((m.lambda1()? - 2.0 * (-2.0 * c).exp()).abs())
        }),
        ("norms_constant", 1e-12, || {
            let m = round();
            let n = m.norms(&GridFunction::constant(m.grid(), 1.0))?;
            let r = (4.0 * PI).sqrt();
            Ok((n.l2 - r)
                .abs()
                .max((n.h1 - r).abs())
                .max((n.c0 - 1.0).abs()))
        }),
        ("norms_y10", 1e-10, || {
            let m = round();
            let n = m.norms(&y(&m, 1, 0))?;
            Ok((n.h1 * n.h1 - 3.0 * n.l2 * n.l2).abs())
        }),
        ("weight_round", 1e-12, || {
            Ok(structure(&[], 2)?.weight_exponent().max_abs())
        }),
        ("weight_flat_bundle", 1e-12, || {
            Ok(structure(&[RhoTerm::from((1, 0, 0.3))], 0)?
                .weight_exponent()
                .max_abs())
        }),
        ("gram_trivial_bundle", 1e-12, || {
            Ok((structure(&[], 0)?.gram_matrix()[(0, 0)].re - 4.0 * PI).abs())
        }),
        ("double_root_north", 0.0, || {
            let d = Divisor::from_angles(&[(0.0, 0.0, 2)])?;
            let c = polynomial_from_divisor(&d);
            Ok(c.coeffs()[0].norm().max(c.coeffs()[1].norm())
                + if c.coeffs()[2].norm() > 0.0 { 0.0 } else { 1.0 })
        }),
        ("constant_section_norm", 1e-12, || {
            let h = structure(&[], 0)?;
            let s = h.normalize(&Section::monomial(0, 0))?;
            let v = h.evaluate_norm(&s)?;
            Ok(v.values()
                .iter()
                .map(|x| (x - 1.0 / (4.0 * PI)).abs())
                .fold(0.0, f64::max))
        }),
        ("norm_matches_gram", 1e-10, || {
            let h = structure(&[RhoTerm::from((2, 1, 0.2))], 2)?;
            let s = Section::new(vec![
                Complex64::new(0.3, -0.2),
                Complex64::new(1.0, 0.5),
                Complex64::new(-0.4, 0.0),
            ]);
            let direct = h.metric().integrate(&h.evaluate_norm(&s)?)?;
            Ok((direct - h.norm(&s).powi(2)).abs() / direct)
        }),
        ("alpha_trivial", 1e-12, || {
            Ok((sup_norm_alpha(&structure(&[], 0)?, 100)?.alpha - 1.0 / (4.0 * PI).sqrt()).abs())
        }),
        ("alpha_monotone", 0.0, || {
            let h = structure(&[RhoTerm::from((1, 0, 0.2))], 2)?;
            let a = sup_norm_alpha(&h, 100)?.alpha;
            let b = sup_norm_alpha(&h, 200)?.alpha;
            Ok((a - b).max(0.0))
        }),
        ("vortex_trivial", 1e-12, || {
            let h = structure(&[], 0)?;
            Ok(solve_vortex(&Divisor::empty(), 0.3, &h)?.u.max_abs())
        }),
        ("vortex_trivial_fields", 1e-12, || {
            let h = structure(&[], 0)?;
            let s = solve_vortex(&Divisor::empty(), 0.3, &h)?;
            let f = reconstruct_fields(&s, &h);
            let target = (0.3 / (4.0 * PI)).sqrt();
            let dev = pseudo_vortex_deviation(&s, &h)?;
            Ok(f.magnetic
                .max_abs()
                .max(diff(
                    &f.phi_norm,
                    &GridFunction::constant(h.metric().grid(), target),
                ))
                .max(dev.field_dev)
                .max(dev.curvature_dev)
                .max(dev.u_c0))
        }),
        ("vortex_axial_symmetry", 1e-9, || {
            let h = structure(&[], 1)?;
            let s = solve_vortex(&Divisor::from_angles(&[(0.0, 0.0, 1)])?, 0.2, &h)?;
            Ok(longitudinal_variance(h.metric().grid(), s.u.values()))
        }),
        ("vortex_flux", 1e-9, || {
            let h = structure(&[RhoTerm::from((1, 0, 0.3))], 2)?;
            let s = solve_vortex(
                &Divisor::from_angles(&[(0.5, 0.2, 1), (2.0, 4.0, 1)])?,
                0.2,
                &h,
            )?;
            Ok((flux(&s, &h)? - 4.0 * PI).abs())
        }),
        ("second_equation", 1e-8, || {
            let h = structure(&[RhoTerm::from((1, 0, 0.3))], 2)?;
            let s = solve_vortex(
                &Divisor::from_angles(&[(0.5, 0.2, 1), (2.0, 4.0, 1)])?,
                0.2,
                &h,
            )?;
            Ok(second_equation_residual(&s, &h))
        }),
        ("u_c0_bound", 0.0, || {
            let h = structure(&[RhoTerm::from((1, 0, 0.3))], 2)?;
            let s = solve_vortex(
                &Divisor::from_angles(&[(0.5, 0.2, 1), (2.0, 4.0, 1)])?,
                0.2,
                &h,
            )?;
            let mean = h.metric().integrate(&s.u)? / h.metric().area();
            let osc =
                s.u.values()
                    .iter()
                    .map(|v| (v - mean).abs())
                    .fold(0.0, f64::max);
            Ok((pseudo_vortex_deviation(&s, &h)?.u_c0 - 2.0 * osc).max(0.0))
        }),
        ("frame_dimension", 0.0, || {
            let mut worst = 0.0f64;
            for n in 0..4 {
                let h = structure(&[], n)?;
                let s = section_from_divisor(&Divisor::from_angles(&vec![(1.0, 0.5, 1); n])?, &h);
                let phi = if n == 0 {
                    h.normalize(&Section::monomial(0, 0))?
                } else {
                    s?
                };
                let f = horizontal_basis(&phi, h.gram_matrix())?;
                worst = worst.max((f.len() as f64 - 2.0 * n as f64).abs());
            }
            Ok(worst)
        }),
        ("lift_vertical_rejected", 0.0, || {
            let h = structure(&[], 1)?;
            let phi = section_from_divisor(&Divisor::from_angles(&[(1.0, 0.5, 1)])?, &h)?;
            let f = horizontal_basis(&phi, h.gram_matrix())?;
            Ok(match horizontal_lift(&f, &phi) {
                Err(Error::DegenerateDirection(_)) => 0.0,
                _ => 1.0,
            })
        }),
        ("lift_idempotent", 1e-10, || {
            let h = structure(&[], 1)?;
            let phi = section_from_divisor(&Divisor::from_angles(&[(1.0, 0.5, 1)])?, &h)?;
            let f = horizontal_basis(&phi, h.gram_matrix())?;
            let psi = &f.directions[0];
            let noisy = psi.axpy(Complex64::new(0.5, 0.3), &phi);
            let a = horizontal_lift(&f, psi)?;
            let b = horizontal_lift(&f, &noisy)?;
            Ok(a.coeffs()
                .iter()
                .zip(psi.coeffs())
                .chain(b.coeffs().iter().zip(psi.coeffs()))
                .map(|(x, z)| (x - z).norm())
                .fold(0.0, f64::max))
        }),
        ("linearized_zero_direction", 0.0, || {
            let h = structure(&[], 1)?;
            let s = solve_vortex(&Divisor::from_angles(&[(1.0, 0.5, 1)])?, 0.2, &h)?;
            let r = solve_linearized(&s, &Section::zero(1), &h)?;
            Ok(r.u_dot.max_abs().max(r.chi_dot.max_abs()))
        }),
        ("metric_symmetry", 1e-9, || {
            let h = structure(&[RhoTerm::from((1, 0, 0.3))], 2)?;
            let s = solve_vortex(
                &Divisor::from_angles(&[(0.5, 0.2, 1), (2.0, 4.0, 1)])?,
                0.2,
                &h,
            )?;
            let f = horizontal_basis(&s.section, h.gram_matrix())?;
            Ok(assemble_metric(&s, &f, &h)?.asymmetry)
        }),
        ("fs_vertical_and_horizontal", 1e-12, || {
            let h = structure(&[], 1)?;
            let phi = section_from_divisor(&Divisor::from_angles(&[(1.0, 0.5, 1)])?, &h)?;
            let f = horizontal_basis(&phi, h.gram_matrix())?;
            let g = h.gram_matrix();
            let c = Complex64::new(-1.5, 0.7);
            let v = fs_metric_coeff(&phi, &phi, g)?.abs();
            let w = (fs_metric_coeff(&phi, &f.directions[0], g)? - 1.0).abs();
            let scaled = fs_metric_coeff(&phi.scaled(c), &f.directions[0].scaled(c), g)?;
            Ok(v.max(w).max((scaled - 1.0).abs()))
        }),
        ("laxmilgram_eigen_case", 1e-10, || {
            let m = round();
            let f = y(&m, 1, 0);
            let one = GridFunction::constant(m.grid(), 1.0);
            let c = lax_milgram_check(&one, &f.scaled(3.0), &m)?;
            let expected = 3f64.sqrt() * m.l2_norm(&f)?;
            Ok((c.lhs - expected).abs() + if c.satisfied { 0.0 } else { 1.0 })
        }),
        ("laxmilgram_zero", 0.0, || {
            let m = round();
            let one = GridFunction::constant(m.grid(), 1.0);
            let c = lax_milgram_check(&one, &GridFunction::constant(m.grid(), 0.0), &m)?;
            Ok(c.lhs + if c.satisfied { 0.0 } else { 1.0 })
        }),
        ("moduli_round_constant", 1e-6, || {
            let h = structure(&[], 1)?;
            let f = moduli_metric_field(0.2, &h, Arc::new(SphereGrid::new(3)?))?;
            Ok(f.relative_variation())
        }),
        ("spectrum_scaling", 1e-9, || {
            let g = Arc::new(SphereGrid::new(11)?);
            let fs = ModuliMetricField::fubini_study(g.clone());
            let scaled = ModuliMetricField::from_ratio(g, fs.ratio.scaled(2.0), 0.1);
            let a = laplace_spectrum(&fs, 2, "dense")?;
            let b = laplace_spectrum(&scaled, 2, "dense")?;
            Ok(a.eigenvalues
                .iter()
                .zip(&b.eigenvalues)
                .skip(1)
                .map(|(x, z)| (z * 2.0 / x - 1.0).abs())
                .fold(0.0, f64::max))
        }),
        ("sandwich_at_zero", 0.0, || {
            let b = ratio_bounds(2.0, 0.0, 1)?;
            Ok((b.lower - 1.0).abs().max((b.upper - 1.0).abs()))
        }),
        ("sandwich_reciprocal", 1e-12, || {
            let (c, e) = (1.7, 0.1);
            let x = c * e;
            let n = 2;
            let b = ratio_bounds(c, e, n)?;
            let swapped = (1.0 + x).powi(n as i32 + 1) / (1.0 - x).powi(n as i32);
            Ok((b.lower * swapped - 1.0).abs())
        }),
        ("fit_exact_power_laws", 1e-12, || {
            let eps = [0.4, 0.2, 0.1, 0.05, 0.025];
            let a = fit_convergence_order(&eps.map(|e| (e, e)))?;
            let b = fit_convergence_order(&eps.map(|e| (e, 3.0 * e * e)))?;
            Ok((a.slope - 1.0)
                .abs()
                .max((a.r_squared - 1.0).abs())
                .max((b.slope - 2.0).abs())
                .max((b.intercept - 3f64.ln()).abs()))
        }),
        ("degenerate_moduli", 0.0, || {
            let h = structure(&[RhoTerm::from((1, 0, 0.3))], 0)?;
            let s = solve_vortex(&Divisor::empty(), 0.1, &h)?;
            let f = horizontal_basis(&s.section, h.gram_matrix())?;
            Ok(assemble_metric(&s, &f, &h)?.deviation + f.len() as f64)
        }),
    ]
}

/// Runs every closed-form check at a small grid.
pub fn selftest_checks() -> Vec<SelfTestCheck> {
    checks()
        .into_iter()
        .map(|(name, tolerance, f)| {
            let value = f().unwrap_or(f64::INFINITY);
            SelfTestCheck {
                name,
                passed: value <= tolerance,
                value,
                tolerance,
            }
        })
        .collect()
}

pub struct SelfTest;

impl Experiment for SelfTest {
    fn name(&self) -> &'static str {
        "selftest"
    }

    fn description(&self) -> &'static str {
        "closed-form checks of every module on a small grid"
    }

    fn run(&self, ctx: &RunContext) -> std::result::Result<Outcome, RunError> {
        let results = selftest_checks();
        let mut table = Table::new(
            "selftest",
            &[
                ("check", "name of the closed-form check"),
                ("passed", "true when value <= tolerance"),
                ("value", "measured discrepancy"),
                ("tolerance", "allowed discrepancy"),
            ],
        );
        let mut lines = Vec::new();
        for c in &results {
            table.push(vec![
                c.name.into(),
                c.passed.to_string(),
                num(c.value),
                num(c.tolerance),
            ]);
            lines.push(format!(
                "{} {:<28} {:.3e} (tol {:.0e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.value,
                c.tolerance
            ));
        }
        let mut sink = ctx.sink()?;
        sink.table(&table)?;
        Ok(Outcome {
            failures: results.iter().filter(|c| !c.passed).count(),
            lines,
            files: sink.written().to_vec(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_check_passes() {
        for c in selftest_checks() {
            assert!(c.passed, "{} = {} > {}", c.name, c.value, c.tolerance);
        }
    }
}
