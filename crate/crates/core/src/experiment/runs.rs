use std::f64::consts::PI;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use super::output::{num, Table};
use super::{structure_for, ConfigError, Experiment, Outcome, RunContext, RunError};
use crate::bundle::{sup_norm_alpha, Divisor, HermitianStructure};
use crate::error::Result;
use crate::fit::{fit_convergence_order, fit_pooled_order, ConvergenceFit, DEVIATION_FLOOR};
use crate::moduli::{assemble_metric, horizontal_basis, lax_milgram_check, MetricSample};
use crate::spectral::{
    compare_spectra, expected_volume, fs_spectrum, laplace_spectrum, moduli_metric_field,
    ratio_bounds, ModuliMetricField, SpectrumReport,
};
use crate::sphere::{GridFunction, SphereGrid, SurfaceMetric};
use crate::vortex::{
    energy, flux, pseudo_vortex_deviation, reconstruct_fields, second_equation_residual,
    solve_vortex, PseudoVortexDeviation, VortexSolution,
};

/// `(divisor index, eps index)` pairs in deterministic order.
fn task_list(divisors: usize, eps: usize) -> Vec<(usize, usize)> {
    (0..divisors)
        .flat_map(|d| (0..eps).map(move |e| (d, e)))
        .collect()
}

fn status_cells<T>(r: &Result<T>) -> [String; 2] {
    match r {
        Ok(_) => ["ok".into(), String::new()],
        Err(e) => ["error".into(), e.code().into()],
    }
}

#[derive(Serialize)]
struct RowError {
    divisor_id: usize,
    eps: f64,
    code: &'static str,
    message: String,
}

fn row_errors<T>(tasks: &[(usize, usize)], results: &[Result<T>], eps: &[f64]) -> Vec<RowError> {
    tasks
        .iter()
        .zip(results)
        .filter_map(|(&(d, e), r)| {
            r.as_ref().err().map(|err| RowError {
                divisor_id: d,
                eps: eps[e],
                code: err.code(),
                message: err.to_string(),
            })
        })
        .collect()
}

fn blanks(n: usize) -> Vec<String> {
    vec![String::new(); n]
}

fn divisor_record(divisors: &[Divisor]) -> serde_json::Value {
    json!(divisors
        .iter()
        .enumerate()
        .map(|(i, d)| json!({ "id": i, "points": d }))
        .collect::<Vec<_>>())
}

/// Vortex statistics shared by `solve-vortex` and `sweep`.
#[derive(Clone, Debug, Serialize)]
struct VortexRecord {
    solution: VortexSolution,
    energy: f64,
    energy_bound: f64,
    flux: f64,
    second_equation: f64,
    deviation: PseudoVortexDeviation,
}

fn vortex_record(d: &Divisor, eps: f64, h: &HermitianStructure) -> Result<VortexRecord> {
    let s = solve_vortex(d, eps, h)?;
    let n = h.degree() as f64;
    Ok(VortexRecord {
        energy: energy(&s, h)?,
        energy_bound: PI * s.tau * n,
        flux: flux(&s, h)?,
        second_equation: second_equation_residual(&s, h),
        deviation: pseudo_vortex_deviation(&s, h)?,
        solution: s,
    })
}

fn metric_of(s: &VortexSolution, h: &HermitianStructure) -> Result<MetricSample> {
    let frame = horizontal_basis(&s.section, h.gram_matrix())?;
    assemble_metric(s, &frame, h)
}

pub struct SolveVortex;

const VORTEX_COLUMNS: [(&str, &str); 18] = [
    (
        "divisor_id",
        "index into the divisor list of the JSON summary",
    ),
    ("eps", "Bradlow parameter"),
    ("status", "ok or error"),
    ("error_code", "failure class when status is error"),
    ("tau", "(4 pi n + eps)/area"),
    ("residual", "projected L2 residual of the scalar equation"),
    ("newton_iters", "Newton iterations"),
    ("last_step", "sup norm of the last Newton update"),
    ("bradlow_relative", "|norm(phi)^2 - eps|/eps"),
    ("energy", "Yang-Mills-Higgs energy"),
    ("energy_bound", "pi tau n"),
    (
        "energy_relative",
        "|energy - energy_bound|/energy_bound (0 when n = 0)",
    ),
    ("flux", "integral of the magnetic field"),
    ("second_equation", "L2 norm of *F - (tau - |phi|^2)/2"),
    ("field_dev", "sup distance of |phi| from sqrt(eps)|phi_hat|"),
    ("curvature_dev", "sup distance of *F from 2 pi n/area"),
    ("u_c0", "sup norm of u"),
    ("u_mean", "g-mean of u"),
];

fn vortex_row(id: usize, eps: f64, r: &Result<VortexRecord>, m: &SurfaceMetric) -> Vec<String> {
    let mut row = vec![id.to_string(), num(eps)];
    row.extend(status_cells(r));
    match r {
        Ok(v) => {
            let s = &v.solution;
            let e_rel = if v.energy_bound > 0.0 {
                (v.energy - v.energy_bound).abs() / v.energy_bound
            } else {
                v.energy.abs()
            };
            let mean = m.integrate(&s.u).map(|x| x / m.area()).unwrap_or(f64::NAN);
            row.extend([
                num(s.tau),
                num(s.residual),
                s.newton_iters.to_string(),
                num(s.last_step),
                num(s.bradlow_residual / eps),
                num(v.energy),
                num(v.energy_bound),
                num(e_rel),
                num(v.flux),
                num(v.second_equation),
                num(v.deviation.field_dev),
                num(v.deviation.curvature_dev),
                num(v.deviation.u_c0),
                num(mean),
            ]);
        }
        Err(_) => row.extend(blanks(14)),
    }
    row
}

impl Experiment for SolveVortex {
    fn name(&self) -> &'static str {
        "solve-vortex"
    }

    fn description(&self) -> &'static str {
        "solve the vortex equations for every (divisor, eps) pair"
    }

    fn run(&self, ctx: &RunContext) -> std::result::Result<Outcome, RunError> {
        let cfg = &ctx.config;
        let h = ctx.structure()?;
        let divisors = cfg.resolve_divisors();
        let tasks = task_list(divisors.len(), cfg.eps_list.len());
        let results: Vec<Result<VortexRecord>> = tasks
            .par_iter()
            .map(|&(d, e)| vortex_record(&divisors[d], cfg.eps_list[e], &h))
            .collect();

        let mut sink = ctx.sink()?;
        let mut table = Table::new("vortex", &VORTEX_COLUMNS);
        for (&(d, e), r) in tasks.iter().zip(&results) {
            table.push(vortex_row(d, cfg.eps_list[e], r, h.metric()));
        }
        sink.table(&table)?;
        if cfg.dump_fields {
            let grid = h.metric().grid().clone();
            for (&(d, e), r) in tasks.iter().zip(&results) {
                if let Ok(v) = r {
                    let f = reconstruct_fields(&v.solution, &h);
                    let tag = format!("d{d}_e{e}");
                    sink.grid_function(
                        &format!("u_{tag}"),
                        &grid,
                        &v.solution.u,
                        "scalar u with |phi|^2 = eps e^u |phi_hat|^2",
                    )?;
                    sink.grid_function(&format!("phi_norm_{tag}"), &grid, &f.phi_norm, "|phi|_h")?;
                    sink.grid_function(&format!("magnetic_{tag}"), &grid, &f.magnetic, "*F_A")?;
                }
            }
        }
        let alpha = sup_norm_alpha(&h, cfg.alpha_samples)?;
        let solutions: Vec<_> = results.iter().filter_map(|r| r.as_ref().ok()).collect();
        sink.json(
            "vortex_summary",
            &json!({
                "config_hash": ctx.config_hash,
                "divisors": divisor_record(&divisors),
                "eps_list": cfg.eps_list,
                "area": h.metric().area(),
                "alpha": alpha,
                "solutions": solutions,
                "errors": row_errors(&tasks, &results, &cfg.eps_list),
            }),
        )?;
        let failures = results.iter().filter(|r| r.is_err()).count();
        Ok(Outcome {
            failures,
            lines: vec![format!(
                "solve-vortex: {} solves, {} failed, alpha >= {:.6}",
                results.len(),
                failures,
                alpha.alpha
            )],
            files: sink.written().to_vec(),
        })
    }
}

pub struct MetricSampleRun;

const METRIC_COLUMNS: [(&str, &str); 12] = [
    (
        "divisor_id",
        "index into the divisor list of the JSON summary",
    ),
    ("eps", "Bradlow parameter"),
    ("status", "ok or error"),
    ("error_code", "failure class when status is error"),
    ("dimension", "real dimension of the horizontal frame (2n)"),
    ("deviation", "spectral norm of G_eps - I"),
    ("deviation_over_eps", "deviation/eps"),
    ("min_eig", "smallest eigenvalue of G_eps"),
    ("max_eig", "largest eigenvalue of G_eps"),
    (
        "gauge_residual_max",
        "largest residual of the gauge-orthogonality solves",
    ),
    (
        "linear_residual_max",
        "largest residual of the linearised scalar solves",
    ),
    (
        "asymmetry",
        "largest entry of G_eps - G_eps^T before symmetrisation",
    ),
];

fn metric_row(id: usize, eps: f64, r: &Result<MetricSample>) -> Vec<String> {
    let mut row = vec![id.to_string(), num(eps)];
    row.extend(status_cells(r));
    match r {
        Ok(m) => row.extend([
            m.g_eps.nrows().to_string(),
            num(m.deviation),
            num(m.deviation / eps),
            num(m.min_eig),
            num(m.max_eig),
            num(m.gauge_residual_max),
            num(m.linear_residual_max),
            num(m.asymmetry),
        ]),
        Err(_) => row.extend(blanks(8)),
    }
    row
}

impl Experiment for MetricSampleRun {
    fn name(&self) -> &'static str {
        "metric-sample"
    }

    fn description(&self) -> &'static str {
        "assemble the normalised L2 metric G_eps at every (divisor, eps) pair"
    }

    fn run(&self, ctx: &RunContext) -> std::result::Result<Outcome, RunError> {
        let cfg = &ctx.config;
        let h = ctx.structure()?;
        let divisors = cfg.resolve_divisors();
        let tasks = task_list(divisors.len(), cfg.eps_list.len());
        let results: Vec<Result<MetricSample>> = tasks
            .par_iter()
            .map(|&(d, e)| {
                solve_vortex(&divisors[d], cfg.eps_list[e], &h).and_then(|s| metric_of(&s, &h))
            })
            .collect();
        let mut sink = ctx.sink()?;
        let mut table = Table::new("metric", &METRIC_COLUMNS);
        for (&(d, e), r) in tasks.iter().zip(&results) {
            table.push(metric_row(d, cfg.eps_list[e], r));
        }
        sink.table(&table)?;
        let samples: Vec<_> = tasks
            .iter()
            .zip(&results)
            .filter_map(|(&(d, _), r)| {
                r.as_ref()
                    .ok()
                    .map(|m| json!({ "divisor_id": d, "sample": m }))
            })
            .collect();
        sink.json(
            "metric_samples",
            &json!({
                "config_hash": ctx.config_hash,
                "divisors": divisor_record(&divisors),
                "samples": samples,
                "errors": row_errors(&tasks, &results, &cfg.eps_list),
            }),
        )?;
        let failures = results.iter().filter(|r| r.is_err()).count();
        let worst = results
            .iter()
            .filter_map(|r| r.as_ref().ok())
            .map(|m| m.deviation / m.eps)
            .fold(0.0f64, f64::max);
        Ok(Outcome {
            failures,
            lines: vec![format!(
                "metric-sample: {} samples, {} failed, max deviation/eps {:.4e}",
                results.len(),
                failures,
                worst
            )],
            files: sink.written().to_vec(),
        })
    }
}

/// Fit of one quantity over one scope of a sweep.
#[derive(Clone, Debug, Serialize)]
pub struct FitRecord {
    /// Divisor index, or `pooled`.
    pub scope: String,
    pub quantity: &'static str,
    /// `fit`, `below_floor` (every value at roundoff level) or `insufficient`.
    pub status: &'static str,
    pub fit: Option<ConvergenceFit>,
    pub points_used: usize,
    pub points_below_floor: usize,
    /// Range of `value/eps` over the points used.
    pub scaled_min: f64,
    pub scaled_max: f64,
}

fn fit_record(scope: String, quantity: &'static str, series: &[(f64, f64)]) -> FitRecord {
    let used: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|p| p.1 > DEVIATION_FLOOR)
        .collect();
    let below = series.len() - used.len();
    let scaled: Vec<f64> = used.iter().map(|(e, d)| d / e).collect();
    let (scaled_min, scaled_max) = if scaled.is_empty() {
        (f64::NAN, f64::NAN)
    } else {
        (
            scaled.iter().copied().fold(f64::INFINITY, f64::min),
            scaled.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        )
    };
    let (status, fit) = if used.is_empty() && !series.is_empty() {
        ("below_floor", None)
    } else {
        match fit_convergence_order(&used) {
            Ok(f) => ("fit", Some(f)),
            Err(_) => ("insufficient", None),
        }
    };
    FitRecord {
        scope,
        quantity,
        status,
        fit,
        points_used: used.len(),
        points_below_floor: below,
        scaled_min,
        scaled_max,
    }
}

fn pooled_record(quantity: &'static str, series: &[Vec<(f64, f64)>]) -> FitRecord {
    let all: Vec<(f64, f64)> = series.iter().flatten().copied().collect();
    let mut rec = fit_record("pooled".into(), quantity, &all);
    if rec.status == "below_floor" {
        return rec;
    }
    let used: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.iter()
                .copied()
                .filter(|p| p.1 > DEVIATION_FLOOR)
                .collect()
        })
        .collect();
    match fit_pooled_order(&used) {
        Ok(f) => {
            rec.status = "fit";
            rec.fit = Some(f);
        }
        Err(_) => {
            rec.status = "insufficient";
            rec.fit = None;
        }
    }
    rec
}

/// One `(divisor, eps)` cell of a sweep.
#[derive(Clone, Debug, Serialize)]
struct SweepCell {
    vortex: VortexRecord,
    metric: MetricSample,
}

const SWEEP_COLUMNS: [(&str, &str); 15] = [
    (
        "divisor_id",
        "index into the divisor list of the JSON summary",
    ),
    ("eps", "Bradlow parameter"),
    ("status", "ok or error"),
    ("error_code", "failure class when status is error"),
    ("deviation", "spectral norm of G_eps - I"),
    ("min_eig", "smallest eigenvalue of G_eps"),
    ("max_eig", "largest eigenvalue of G_eps"),
    ("field_dev", "sup distance of |phi| from sqrt(eps)|phi_hat|"),
    ("curvature_dev", "sup distance of *F from 2 pi n/area"),
    ("u_c0", "sup norm of u"),
    ("residual", "projected L2 residual of the scalar equation"),
    ("newton_iters", "Newton iterations"),
    ("bradlow_relative", "|norm(phi)^2 - eps|/eps"),
    (
        "energy_relative",
        "|energy - pi tau n|/(pi tau n) (0 when n = 0)",
    ),
    (
        "gauge_residual_max",
        "largest residual of the gauge-orthogonality solves",
    ),
];

const FIT_COLUMNS: [(&str, &str); 10] = [
    ("scope", "divisor index or pooled"),
    ("quantity", "deviation, field_dev or curvature_dev"),
    ("status", "fit, below_floor or insufficient"),
    ("slope", "least-squares slope of log value against log eps"),
    ("intercept", "intercept of the same line"),
    ("r_squared", "coefficient of determination"),
    ("points_used", "points above the roundoff floor"),
    (
        "points_below_floor",
        "points at or below the roundoff floor",
    ),
    ("scaled_min", "smallest value/eps over the points used"),
    ("scaled_max", "largest value/eps over the points used"),
];

fn fit_row(f: &FitRecord) -> Vec<String> {
    let (slope, intercept, r2) = match &f.fit {
        Some(x) => (num(x.slope), num(x.intercept), num(x.r_squared)),
        None => (String::new(), String::new(), String::new()),
    };
    let opt = |v: f64| if v.is_nan() { String::new() } else { num(v) };
    vec![
        f.scope.clone(),
        f.quantity.into(),
        f.status.into(),
        slope,
        intercept,
        r2,
        f.points_used.to_string(),
        f.points_below_floor.to_string(),
        opt(f.scaled_min),
        opt(f.scaled_max),
    ]
}

/// Result of [`run_sweep`].
#[derive(Clone, Debug, Serialize)]
pub struct SweepReport {
    pub rows: usize,
    pub failures: usize,
    pub fits: Vec<FitRecord>,
}

impl SweepReport {
    pub fn pooled(&self, quantity: &str) -> Option<&FitRecord> {
        self.fits
            .iter()
            .find(|f| f.scope == "pooled" && f.quantity == quantity)
    }
}

/// Solves, assembles and fits every `(divisor, eps)` pair of the config.
/// Per-row failures are recorded and do not stop the sweep.
pub fn run_sweep(ctx: &RunContext) -> std::result::Result<(SweepReport, Outcome), RunError> {
    let cfg = &ctx.config;
    let h = ctx.structure()?;
    let divisors = cfg.resolve_divisors();
    let tasks = task_list(divisors.len(), cfg.eps_list.len());
    let results: Vec<Result<SweepCell>> = tasks
        .par_iter()
        .map(|&(d, e)| {
            let vortex = vortex_record(&divisors[d], cfg.eps_list[e], &h)?;
            let metric = metric_of(&vortex.solution, &h)?;
            Ok(SweepCell { vortex, metric })
        })
        .collect();

    let mut sink = ctx.sink()?;
    let mut table = Table::new("sweep", &SWEEP_COLUMNS);
    for (&(d, e), r) in tasks.iter().zip(&results) {
        let eps = cfg.eps_list[e];
        let mut row = vec![d.to_string(), num(eps)];
        row.extend(status_cells(r));
        match r {
            Ok(c) => {
                let s = &c.vortex.solution;
                let e_rel = if c.vortex.energy_bound > 0.0 {
                    (c.vortex.energy - c.vortex.energy_bound).abs() / c.vortex.energy_bound
                } else {
                    c.vortex.energy.abs()
                };
                row.extend([
                    num(c.metric.deviation),
                    num(c.metric.min_eig),
                    num(c.metric.max_eig),
                    num(c.vortex.deviation.field_dev),
                    num(c.vortex.deviation.curvature_dev),
                    num(c.vortex.deviation.u_c0),
                    num(s.residual),
                    s.newton_iters.to_string(),
                    num(s.bradlow_residual / eps),
                    num(e_rel),
                    num(c.metric.gauge_residual_max),
                ]);
            }
            Err(_) => row.extend(blanks(11)),
        }
        table.push(row);
    }
    sink.table(&table)?;

    type Pick = fn(&SweepCell) -> f64;
    let quantities: [(&'static str, Pick); 3] = [
        ("deviation", |c| c.metric.deviation),
        ("field_dev", |c| c.vortex.deviation.field_dev),
        ("curvature_dev", |c| c.vortex.deviation.curvature_dev),
    ];
    let mut fits = Vec::new();
    for (name, pick) in quantities {
        let mut per_divisor: Vec<Vec<(f64, f64)>> = vec![Vec::new(); divisors.len()];
        for (&(d, e), r) in tasks.iter().zip(&results) {
            if let Ok(c) = r {
                per_divisor[d].push((cfg.eps_list[e], pick(c)));
            }
        }
        for (d, series) in per_divisor.iter().enumerate() {
            fits.push(fit_record(d.to_string(), name, series));
        }
        fits.push(pooled_record(name, &per_divisor));
    }
    let mut fit_table = Table::new("fits", &FIT_COLUMNS);
    for f in &fits {
        fit_table.push(fit_row(f));
    }
    sink.table(&fit_table)?;

    let failures = results.iter().filter(|r| r.is_err()).count();
    let report = SweepReport {
        rows: results.len(),
        failures,
        fits,
    };
    sink.json(
        "sweep_summary",
        &json!({
            "config_hash": ctx.config_hash,
            "divisors": divisor_record(&divisors),
            "eps_list": cfg.eps_list,
            "deviation_floor": DEVIATION_FLOOR,
            "report": report,
            "errors": row_errors(&tasks, &results, &cfg.eps_list),
        }),
    )?;
    let mut lines = vec![format!("sweep: {} rows, {} failed", report.rows, failures)];
    for q in ["deviation", "field_dev", "curvature_dev"] {
        if let Some(f) = report.pooled(q) {
            lines.push(match &f.fit {
                Some(x) => format!("  pooled {q}: slope {:.4}, r^2 {:.4}", x.slope, x.r_squared),
                None => format!("  pooled {q}: {}", f.status),
            });
        }
    }
    let outcome = Outcome {
        failures,
        lines,
        files: sink.written().to_vec(),
    };
    Ok((report, outcome))
}

pub struct Sweep;

impl Experiment for Sweep {
    fn name(&self) -> &'static str {
        "sweep"
    }

    fn description(&self) -> &'static str {
        "eps-sweep with convergence-order fits per divisor and pooled"
    }

    fn run(&self, ctx: &RunContext) -> std::result::Result<Outcome, RunError> {
        run_sweep(ctx).map(|(_, o)| o)
    }
}

/// Moduli fields, spectra and sandwich comparison of a `spectrum` run.
#[derive(Clone, Debug, Serialize)]
pub struct SpectrumLevel {
    pub eps: f64,
    pub volume: f64,
    pub expected_volume: f64,
    pub anisotropy: f64,
    pub max_deviation: f64,
    pub relative_variation: f64,
    pub spectrum: SpectrumReport,
    pub max_ratio_deviation: f64,
    pub bounds_violations: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSummary {
    pub c_empirical: f64,
    pub reference: SpectrumReport,
    pub levels: Vec<SpectrumLevel>,
}

/// Empirical metric constant `max_ε max_x ‖G_ε − I‖/ε`, floored so that it
/// stays positive when the metric is degenerate to roundoff.
pub fn empirical_constant(fields: &[ModuliMetricField]) -> f64 {
    let eps_min = fields.iter().map(|f| f.eps).fold(f64::INFINITY, f64::min);
    fields
        .iter()
        .map(|f| f.max_deviation / f.eps)
        .fold(DEVIATION_FLOOR / eps_min, f64::max)
}

const SPECTRUM_COLUMNS: [(&str, &str); 10] = [
    ("eps", "Bradlow parameter"),
    ("k", "Fubini-Study cluster of the eigenvalue"),
    (
        "index",
        "position in the sorted spectrum (0 is the zero mode)",
    ),
    (
        "lambda_eps",
        "Laplace eigenvalue of the normalised metric g_eps",
    ),
    ("lambda_fs", "Fubini-Study eigenvalue 4k(k+1)"),
    ("ratio", "lambda_eps/lambda_fs"),
    (
        "bound_lower",
        "lower sandwich bound with the empirical constant",
    ),
    (
        "bound_upper",
        "upper sandwich bound with the empirical constant",
    ),
    (
        "within_bounds",
        "true when bound_lower <= ratio <= bound_upper",
    ),
    (
        "energy",
        "lambda_eps/(2 eps), level of the free Laplacian of g",
    ),
];

/// Computes the moduli fields for every configured `eps` (degree 1 only).
pub fn moduli_fields(ctx: &RunContext) -> std::result::Result<Vec<ModuliMetricField>, RunError> {
    let cfg = &ctx.config;
    if cfg.n != 1 {
        return Err(ConfigError::new("n", format!("spectrum needs n = 1, got {}", cfg.n)).into());
    }
    let h = ctx.structure()?;
    let grid = Arc::new(SphereGrid::new(cfg.moduli_l_max)?);
    cfg.eps_list
        .iter()
        .map(|&eps| moduli_metric_field(eps, &h, grid.clone()).map_err(RunError::from))
        .collect()
}

pub fn spectrum_summary(
    fields: &[ModuliMetricField],
    k_max: usize,
    solver: &str,
) -> Result<SpectrumSummary> {
    let reference = fs_spectrum(1, k_max)?;
    let c = empirical_constant(fields);
    let mut levels = Vec::new();
    for f in fields {
        let spectrum = laplace_spectrum(f, k_max, solver)?;
        let bounds = ratio_bounds(c, f.eps, 1)?;
        let rows = compare_spectra(&spectrum, &reference);
        let violations = rows
            .iter()
            .filter(|r| r.ratio < bounds.lower || r.ratio > bounds.upper)
            .count();
        levels.push(SpectrumLevel {
            eps: f.eps,
            volume: f.volume(),
            expected_volume: expected_volume(1, f.eps),
            anisotropy: f.anisotropy,
            max_deviation: f.max_deviation,
            relative_variation: f.relative_variation(),
            max_ratio_deviation: rows
                .iter()
                .map(|r| (r.ratio - 1.0).abs())
                .fold(0.0, f64::max),
            bounds_violations: violations,
            spectrum,
        });
    }
    Ok(SpectrumSummary {
        c_empirical: c,
        reference,
        levels,
    })
}

pub struct SpectrumRun;

impl Experiment for SpectrumRun {
    fn name(&self) -> &'static str {
        "spectrum"
    }

    fn description(&self) -> &'static str {
        "Laplace spectrum of the one-vortex moduli metric against Fubini-Study"
    }

    fn run(&self, ctx: &RunContext) -> std::result::Result<Outcome, RunError> {
        let cfg = &ctx.config;
        let fields = moduli_fields(ctx)?;
        let summary = spectrum_summary(&fields, cfg.k_max, &cfg.eigensolver)?;
        let mut sink = ctx.sink()?;
        let mut table = Table::new("spectrum", &SPECTRUM_COLUMNS);
        for level in &summary.levels {
            let b = ratio_bounds(summary.c_empirical, level.eps, 1)?;
            for r in compare_spectra(&level.spectrum, &summary.reference) {
                let inside = r.ratio >= b.lower && r.ratio <= b.upper;
                table.push(vec![
                    num(level.eps),
                    r.k.to_string(),
                    r.index.to_string(),
                    num(r.lambda_eps),
                    num(r.lambda_fs),
                    num(r.ratio),
                    num(b.lower),
                    num(b.upper),
                    inside.to_string(),
                    num(r.lambda_eps / (2.0 * level.eps)),
                ]);
            }
        }
        sink.table(&table)?;
        if cfg.dump_fields {
            for (i, f) in fields.iter().enumerate() {
                sink.grid_function(
                    &format!("moduli_ratio_e{i}"),
                    &f.moduli_grid,
                    &f.ratio,
                    "conformal factor of g_eps relative to the round unit metric on the moduli sphere",
                )?;
            }
        }
        sink.json(
            "spectrum_summary",
            &json!({ "config_hash": ctx.config_hash, "summary": summary }),
        )?;
        let failures = summary.levels.iter().map(|l| l.bounds_violations).sum();
        let mut lines = vec![format!("spectrum: C = {:.4e}", summary.c_empirical)];
        for l in &summary.levels {
            lines.push(format!(
                "  eps {}: volume/(pi eps) {:.6}, max |ratio - 1| {:.3e}, violations {}",
                l.eps,
                l.volume / l.expected_volume,
                l.max_ratio_deviation,
                l.bounds_violations
            ));
        }
        Ok(Outcome {
            failures,
            lines,
            files: sink.written().to_vec(),
        })
    }
}

/// Random band-limited function with coefficients `N(0,1)/(l+1)`.
fn random_band_limited(grid: &SphereGrid, band: usize, rng: &mut ChaCha8Rng) -> GridFunction {
    let mut coeffs = vec![0.0; grid.coeff_count()];
    for (idx, c) in coeffs.iter_mut().enumerate().take((band + 1) * (band + 1)) {
        let (l, _) = SphereGrid::degree_order(idx);
        let z: f64 = StandardNormal.sample(rng);
        *c = z / (l + 1) as f64;
    }
    GridFunction::from_coeffs(grid, &coeffs)
}

/// Random pair `(a, b)` with `a = s²` for a band-limited `s`, so `a ≥ 0`.
pub fn random_laxmilgram_instance(
    grid: &SphereGrid,
    band: usize,
    rng: &mut ChaCha8Rng,
) -> (GridFunction, GridFunction) {
    let s = random_band_limited(grid, band, rng);
    let a = s.map(|x| x * x);
    let b = random_band_limited(grid, 2 * band, rng);
    (a, b)
}

const LAXMILGRAM_COLUMNS: [(&str, &str); 10] = [
    ("metric", "round or configured"),
    ("instance", "instance number"),
    ("status", "ok or error"),
    ("error_code", "failure class when status is error"),
    ("lhs", "H1 norm of the solution"),
    ("rhs", "explicit Lax-Milgram bound"),
    ("constant", "(1 + 1/lambda_1) max(1, sqrt(area))"),
    ("lambda1", "first nonzero Laplace eigenvalue"),
    ("satisfied", "true when lhs <= rhs"),
    ("margin", "lhs/rhs"),
];

pub struct CheckLaxMilgram;

impl Experiment for CheckLaxMilgram {
    fn name(&self) -> &'static str {
        "check-laxmilgram"
    }

    fn description(&self) -> &'static str {
        "random instances of the explicit H1 bound for the Helmholtz problem"
    }

    fn run(&self, ctx: &RunContext) -> std::result::Result<Outcome, RunError> {
        let cfg = &ctx.config;
        let grid = Arc::new(SphereGrid::new(cfg.l_max)?);
        let mut metrics = vec![("round", SurfaceMetric::round(grid.clone()))];
        if !cfg.rho_coeffs.is_empty() {
            let h = structure_for(cfg, cfg.l_max, 0)?;
            metrics.push((
                "configured",
                SurfaceMetric::from_rho_terms(grid.clone(), h.metric().rho_terms())?,
            ));
        }
        let mut table = Table::new("laxmilgram", &LAXMILGRAM_COLUMNS);
        let mut failures = 0;
        let mut lines = Vec::new();
        for (name, m) in &metrics {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let instances: Vec<_> = (0..cfg.laxmilgram_instances)
                .map(|_| {
                    random_laxmilgram_instance(
                        &grid,
                        cfg.laxmilgram_band.min(cfg.l_max / 2),
                        &mut rng,
                    )
                })
                .collect();
            m.lambda1()?;
            let results: Vec<_> = instances
                .par_iter()
                .map(|(a, b)| lax_milgram_check(a, b, m))
                .collect();
            let mut satisfied = 0;
            let mut worst = 0.0f64;
            for (i, r) in results.iter().enumerate() {
                let mut row = vec![name.to_string(), i.to_string()];
                row.extend(status_cells(r));
                match r {
                    Ok(c) => {
                        if c.satisfied {
                            satisfied += 1;
                        } else {
                            failures += 1;
                        }
                        let margin = if c.rhs > 0.0 { c.lhs / c.rhs } else { 0.0 };
                        worst = worst.max(margin);
                        row.extend([
                            num(c.lhs),
                            num(c.rhs),
                            num(c.constant),
                            num(c.lambda1),
                            c.satisfied.to_string(),
                            num(margin),
                        ]);
                    }
                    Err(_) => {
                        failures += 1;
                        row.extend(blanks(6));
                    }
                }
                table.push(row);
            }
            lines.push(format!(
                "check-laxmilgram [{name}]: {satisfied}/{} satisfied, largest lhs/rhs {worst:.4}",
                results.len()
            ));
        }
        let mut sink = ctx.sink()?;
        sink.table(&table)?;
        Ok(Outcome {
            failures,
            lines,
            files: sink.written().to_vec(),
        })
    }
}
