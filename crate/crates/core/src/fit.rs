//! Log–log least-squares fits of convergence order.

use serde::Serialize;

use crate::error::{Error, Result};

/// Deviations at or below this level are indistinguishable from roundoff in
/// the metric assembly and carry no rate information.
pub const DEVIATION_FLOOR: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(log ε, log deviation)` pairs used in the fit.
    pub points: Vec<(f64, f64)>,
}

/// Fits `log dev = slope · log eps + intercept`.
pub fn fit_convergence_order(points: &[(f64, f64)]) -> Result<ConvergenceFit> {
    if points.len() < 4 {
        return Err(Error::Precondition(format!(
            "a convergence fit needs at least 4 points, got {}",
            points.len()
        )));
    }
    if let Some(&(e, d)) = points.iter().find(|(e, d)| !(*e > 0.0 && *d > 0.0)) {
        return Err(Error::Precondition(format!(
            "convergence fit needs positive data, found ({e}, {d})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|(e, d)| (e.ln(), d.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Precondition(
            "convergence fit needs distinct eps values".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = logs
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(ConvergenceFit {
        slope,
        intercept,
        r_squared,
        points: logs,
    })
}

/// Common slope across several series, each with its own intercept. The
/// reported intercept is the mean of the per-series intercepts.
pub fn fit_pooled_order(series: &[Vec<(f64, f64)>]) -> Result<ConvergenceFit> {
    let total: usize = series.iter().map(Vec::len).sum();
    if total < 4 {
        return Err(Error::Precondition(format!(
            "a pooled fit needs at least 4 points, got {total}"
        )));
    }
    let mut groups = Vec::new();
    for s in series.iter().filter(|s| !s.is_empty()) {
        if let Some(&(e, d)) = s.iter().find(|(e, d)| !(*e > 0.0 && *d > 0.0)) {
            return Err(Error::Precondition(format!(
                "convergence fit needs positive data, found ({e}, {d})"
            )));
        }
        let logs: Vec<(f64, f64)> = s.iter().map(|(e, d)| (e.ln(), d.ln())).collect();
        let n = logs.len() as f64;
        let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
        let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
        groups.push((logs, mx, my));
    }
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (logs, mx, my) in &groups {
        for (x, y) in logs {
            sxx += (x - mx) * (x - mx);
            sxy += (x - mx) * (y - my);
            syy += (y - my) * (y - my);
        }
    }
    if sxx == 0.0 {
        return Err(Error::Precondition(
            "convergence fit needs distinct eps values".into(),
        ));
    }
    let slope = sxy / sxx;
    let mut sse = 0.0;
    let mut intercepts = 0.0;
    for (logs, mx, my) in &groups {
        let b = my - slope * mx;
        intercepts += b;
        sse += logs
            .iter()
            .map(|(x, y)| (y - b - slope * x).powi(2))
            .sum::<f64>();
    }
    Ok(ConvergenceFit {
        slope,
        intercept: intercepts / groups.len() as f64,
        r_squared: if syy == 0.0 { 1.0 } else { 1.0 - sse / syy },
        points: groups.into_iter().flat_map(|g| g.0).collect(),
    })
}
