//! Gauss–Legendre × uniform-longitude grid with a real spherical-harmonic
//! transform.
//!
//! Real harmonics are orthonormal on the round unit sphere and carry no
//! Condon–Shortley phase:
//!
//! * `Y_{l,0}  = N_{l0} P_l(cos θ)`
//! * `Y_{l,m}  = √2 N_{lm} P_l^m(cos θ) cos(mφ)` for `m > 0`
//! * `Y_{l,-m} = √2 N_{lm} P_l^m(cos θ) sin(mφ)` for `m > 0`
//!
//! Coefficient vectors have length `(l_max + 1)²` and are indexed by
//! [`SphereGrid::index`]. Grid values are stored row-major in
//! `(theta, phi)` order.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Table {
    Value,
    DTheta,
}

#[derive(Clone)]
pub struct SphereGrid {
    l_max: usize,
    n_theta: usize,
    n_phi: usize,
    theta: Vec<f64>,
    cos_theta: Vec<f64>,
    sin_theta: Vec<f64>,
    phi: Vec<f64>,
    gl_weights: Vec<f64>,
    weights: Vec<f64>,
    // Normalised associated Legendre values, per m: rows l = m..=l_max+1.
    legendre: Vec<f64>,
    // d/dθ of the above, per m: rows l = m..=l_max.
    dlegendre: Vec<f64>,
    leg_offset: Vec<usize>,
    dleg_offset: Vec<usize>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SphereGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereGrid")
            .field("l_max", &self.l_max)
            .field("n_theta", &self.n_theta)
            .field("n_phi", &self.n_phi)
            .finish()
    }
}

impl PartialEq for SphereGrid {
    fn eq(&self, other: &Self) -> bool {
        self.l_max == other.l_max && self.n_theta == other.n_theta && self.n_phi == other.n_phi
    }
}

impl SphereGrid {
    /// Minimal exact grid for truncation `l_max`: `l_max + 1` colatitudes and
    /// `2(l_max + 1)` longitudes.
    pub fn new(l_max: usize) -> Result<Self> {
        Self::with_shape(l_max, l_max + 1, 2 * (l_max + 1))
    }

    pub fn with_shape(l_max: usize, n_theta: usize, n_phi: usize) -> Result<Self> {
        if n_theta < l_max + 1 {
            return Err(Error::Precondition(format!(
                "n_theta = {n_theta} must be at least l_max + 1 = {}",
                l_max + 1
            )));
        }
        if n_phi < 2 * l_max + 1 {
            return Err(Error::Precondition(format!(
                "n_phi = {n_phi} must be at least 2 l_max + 1 = {}",
                2 * l_max + 1
            )));
        }
        let (cos_theta, gl_weights) = gauss_legendre(n_theta);
        let sin_theta: Vec<f64> = cos_theta.iter().map(|x| (1.0 - x * x).sqrt()).collect();
        let theta: Vec<f64> = cos_theta.iter().map(|x| x.acos()).collect();
        let phi: Vec<f64> = (0..n_phi)
            .map(|k| 2.0 * PI * k as f64 / n_phi as f64)
            .collect();
        let dphi = 2.0 * PI / n_phi as f64;
        let mut weights = Vec::with_capacity(n_theta * n_phi);
        for w in &gl_weights {
            weights.extend(std::iter::repeat_n(w * dphi, n_phi));
        }

        let mut leg_offset = Vec::with_capacity(l_max + 1);
        let mut dleg_offset = Vec::with_capacity(l_max + 1);
        let mut legendre = Vec::new();
        let mut dlegendre = Vec::new();
        for m in 0..=l_max {
            leg_offset.push(legendre.len());
            dleg_offset.push(dlegendre.len());
            let rows = l_max + 2 - m;
            let mut block = vec![0.0; rows * n_theta];
            for j in 0..n_theta {
                let col = legendre_column(cos_theta[j], sin_theta[j], m, l_max + 1);
                for (r, v) in col.iter().enumerate() {
                    block[r * n_theta + j] = *v;
                }
            }
            let mut dblock = vec![0.0; (rows - 1) * n_theta];
            for l in m..=l_max {
                let r = l - m;
                for j in 0..n_theta {
                    let up = block[(r + 1) * n_theta + j];
                    let down = if l > m {
                        block[(r - 1) * n_theta + j]
                    } else {
                        0.0
                    };
                    dblock[r * n_theta + j] = (l as f64 * jacobi_coeff(l + 1, m) * up
                        - (l + 1) as f64 * jacobi_coeff(l, m) * down)
                        / sin_theta[j];
                }
            }
            legendre.extend(block);
            dlegendre.extend(dblock);
        }

        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n_phi);
        let inverse = planner.plan_fft_inverse(n_phi);

        Ok(Self {
            l_max,
            n_theta,
            n_phi,
            theta,
            cos_theta,
            sin_theta,
            phi,
            gl_weights,
            weights,
            legendre,
            dlegendre,
            leg_offset,
            dleg_offset,
            forward,
            inverse,
        })
    }

    pub fn l_max(&self) -> usize {
        self.l_max
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn node_count(&self) -> usize {
        self.n_theta * self.n_phi
    }

    pub fn coeff_count(&self) -> usize {
        (self.l_max + 1) * (self.l_max + 1)
    }

    /// Position of `Y_{l,m}` in a coefficient vector.
    #[inline]
    pub fn index(l: usize, m: i64) -> usize {
        ((l * l + l) as i64 + m) as usize
    }

    /// Inverse of [`SphereGrid::index`].
    pub fn degree_order(idx: usize) -> (usize, i64) {
        let l = (idx as f64).sqrt() as usize;
        let l = if (l + 1) * (l + 1) <= idx { l + 1 } else { l };
        (l, idx as i64 - (l * l + l) as i64)
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn cos_theta(&self) -> &[f64] {
        &self.cos_theta
    }

    pub fn sin_theta(&self) -> &[f64] {
        &self.sin_theta
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    /// Gauss–Legendre weights in `cos θ` (they sum to 2).
    pub fn gauss_weights(&self) -> &[f64] {
        &self.gl_weights
    }

    /// Quadrature weight of every node on the round unit sphere (sums to 4π).
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `(theta, phi)` of node `idx`.
    pub fn node(&self, idx: usize) -> (f64, f64) {
        (self.theta[idx / self.n_phi], self.phi[idx % self.n_phi])
    }

    pub fn nodes(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..self.node_count()).map(move |i| self.node(i))
    }

    /// Unit 3-vector of node `idx`.
    pub fn node_vector(&self, idx: usize) -> [f64; 3] {
        let j = idx / self.n_phi;
        let (s, c) = self.phi[idx % self.n_phi].sin_cos();
        [
            self.sin_theta[j] * c,
            self.sin_theta[j] * s,
            self.cos_theta[j],
        ]
    }

    fn row(&self, table: Table, m: usize, l: usize) -> &[f64] {
        let nt = self.n_theta;
        match table {
            Table::Value => {
                let start = self.leg_offset[m] + (l - m) * nt;
                &self.legendre[start..start + nt]
            }
            Table::DTheta => {
                let start = self.dleg_offset[m] + (l - m) * nt;
                &self.dlegendre[start..start + nt]
            }
        }
    }

    /// Quadrature projection of grid values onto the harmonics `l ≤ l_max`.
    pub fn analyze(&self, values: &[f64]) -> Vec<f64> {
        debug_assert_eq!(values.len(), self.node_count());
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward.process(&mut buf);

        let dphi = 2.0 * PI / np as f64;
        let mut out = vec![0.0; self.coeff_count()];
        let mut cos_part = vec![0.0; nt];
        let mut sin_part = vec![0.0; nt];
        for m in 0..=self.l_max {
            let scale = if m == 0 {
                dphi
            } else {
                dphi * std::f64::consts::SQRT_2
            };
            for j in 0..nt {
                let f = buf[j * np + m];
                cos_part[j] = self.gl_weights[j] * scale * f.re;
                sin_part[j] = -self.gl_weights[j] * scale * f.im;
            }
            for l in m..=self.l_max {
                let row = self.row(Table::Value, m, l);
                let c: f64 = row.iter().zip(&cos_part).map(|(a, b)| a * b).sum();
                out[Self::index(l, m as i64)] = c;
                if m > 0 {
                    let s: f64 = row.iter().zip(&sin_part).map(|(a, b)| a * b).sum();
                    out[Self::index(l, -(m as i64))] = s;
                }
            }
        }
        out
    }

    /// Grid values of the band-limited function with the given coefficients.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        self.synth(coeffs, Table::Value, false)
    }

    /// `∂f/∂θ` at the nodes.
    pub fn synthesize_dtheta(&self, coeffs: &[f64]) -> Vec<f64> {
        self.synth(coeffs, Table::DTheta, false)
    }

    /// `(1/sin θ) ∂f/∂φ` at the nodes.
    pub fn synthesize_dphi_over_sin(&self, coeffs: &[f64]) -> Vec<f64> {
        let mut values = self.synth(coeffs, Table::Value, true);
        for (j, s) in self.sin_theta.iter().enumerate() {
            for v in &mut values[j * self.n_phi..(j + 1) * self.n_phi] {
                *v /= s;
            }
        }
        values
    }

    fn synth(&self, coeffs: &[f64], table: Table, dphi: bool) -> Vec<f64> {
        debug_assert_eq!(coeffs.len(), self.coeff_count());
        let (nt, np) = (self.n_theta, self.n_phi);
        let mut buf = vec![Complex64::new(0.0, 0.0); nt * np];
        let mut cos_acc = vec![0.0; nt];
        let mut sin_acc = vec![0.0; nt];
        for m in 0..=self.l_max {
            cos_acc.iter_mut().for_each(|v| *v = 0.0);
            sin_acc.iter_mut().for_each(|v| *v = 0.0);
            for l in m..=self.l_max {
                let mut c = coeffs[Self::index(l, m as i64)];
                let mut s = if m > 0 {
                    coeffs[Self::index(l, -(m as i64))]
                } else {
                    0.0
                };
                if dphi {
                    let mf = m as f64;
                    (c, s) = (mf * s, -mf * c);
                }
                if c == 0.0 && s == 0.0 {
                    continue;
                }
                let row = self.row(table, m, l);
                for j in 0..nt {
                    cos_acc[j] += row[j] * c;
                    sin_acc[j] += row[j] * s;
                }
            }
            for j in 0..nt {
                buf[j * np + m] = if m == 0 {
                    Complex64::new(cos_acc[j], 0.0)
                } else {
                    Complex64::new(cos_acc[j], -sin_acc[j]) * std::f64::consts::SQRT_2
                };
            }
        }
        self.inverse.process(&mut buf);
        buf.into_iter().map(|z| z.re).collect()
    }

    /// Evaluates the band-limited function at an arbitrary point.
    pub fn evaluate_at(&self, coeffs: &[f64], theta: f64, phi: f64) -> f64 {
        let (x, s) = (theta.cos(), theta.sin());
        let mut total = 0.0;
        for m in 0..=self.l_max {
            let col = legendre_column(x, s, m, self.l_max);
            let (sm, cm) = (m as f64 * phi).sin_cos();
            for (r, p) in col.iter().enumerate() {
                let l = m + r;
                if m == 0 {
                    total += p * coeffs[Self::index(l, 0)];
                } else {
                    total += std::f64::consts::SQRT_2
                        * p
                        * (coeffs[Self::index(l, m as i64)] * cm
                            + coeffs[Self::index(l, -(m as i64))] * sm);
                }
            }
        }
        total
    }
}

/// Values of the orthonormal real harmonic `Y_{l,m}` at a point.
pub fn real_harmonic(l: usize, m: i64, theta: f64, phi: f64) -> f64 {
    let am = m.unsigned_abs() as usize;
    assert!(am <= l, "order exceeds degree");
    let col = legendre_column(theta.cos(), theta.sin(), am, l);
    let p = col[l - am];
    match m {
        0 => p,
        m if m > 0 => std::f64::consts::SQRT_2 * p * (m as f64 * phi).cos(),
        _ => std::f64::consts::SQRT_2 * p * (am as f64 * phi).sin(),
    }
}

// sqrt((l² − m²)/(4l² − 1)): off-diagonal of the three-term recurrence
// x·P̄_l = a_{l+1} P̄_{l+1} + a_l P̄_{l−1}.
fn jacobi_coeff(l: usize, m: usize) -> f64 {
    if l <= m {
        return 0.0;
    }
    let (l, m) = (l as f64, m as f64);
    ((l * l - m * m) / (4.0 * l * l - 1.0)).sqrt()
}

/// `N_{lm} P_l^m(x)` for `l = m..=l_top` (empty if `l_top < m`).
fn legendre_column(x: f64, sin_theta: f64, m: usize, l_top: usize) -> Vec<f64> {
    if l_top < m {
        return Vec::new();
    }
    let mut out = Vec::with_capacity(l_top - m + 1);
    let mut pmm = (1.0 / (4.0 * PI)).sqrt();
    for k in 1..=m {
        let k = k as f64;
        pmm *= ((2.0 * k - 1.0) / (2.0 * k)).sqrt() * sin_theta;
    }
    pmm *= ((2 * m + 1) as f64).sqrt();
    out.push(pmm);
    if l_top == m {
        return out;
    }
    let mut prev2 = pmm;
    let mut prev1 = x * ((2 * m + 3) as f64).sqrt() * pmm;
    out.push(prev1);
    for l in (m + 2)..=l_top {
        let a = jacobi_coeff(l, m);
        let b = jacobi_coeff(l - 1, m);
        let next = (x * prev1 - b * prev2) / a;
        out.push(next);
        prev2 = prev1;
        prev1 = next;
    }
    out
}

/// Gauss–Legendre nodes (descending, so colatitude ascends) and weights.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_and_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        nodes[n - 1 - i] = -x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    (p1, nf * (x * p1 - p0) / (x * x - 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_four_pi_and_avoid_poles() {
        for l_max in [3, 15, 63] {
            let g = SphereGrid::new(l_max).unwrap();
            let total: f64 = g.weights().iter().sum();
            assert!((total - 4.0 * PI).abs() / (4.0 * PI) < 1e-12);
            assert!(g.theta().iter().all(|&t| t > 0.0 && t < PI));
        }
    }

    #[test]
    fn shape_invariants_are_enforced() {
        assert!(SphereGrid::with_shape(10, 10, 40).is_err());
        assert!(SphereGrid::with_shape(10, 11, 20).is_err());
        assert!(SphereGrid::with_shape(10, 11, 21).is_ok());
    }

    #[test]
    fn index_round_trips() {
        for idx in 0..400 {
            let (l, m) = SphereGrid::degree_order(idx);
            assert!(m.unsigned_abs() as usize <= l);
            assert_eq!(SphereGrid::index(l, m), idx);
        }
    }

    #[test]
    fn harmonics_are_orthonormal_under_quadrature() {
        let g = SphereGrid::new(12).unwrap();
        let n = g.coeff_count();
        let cols: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut c = vec![0.0; n];
                c[i] = 1.0;
                g.synthesize(&c)
            })
            .collect();
        for i in 0..n {
            for k in i..n {
                let ip: f64 = cols[i]
                    .iter()
                    .zip(&cols[k])
                    .zip(g.weights())
                    .map(|((a, b), w)| a * b * w)
                    .sum();
                let expected = if i == k { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-10, "({i},{k}) -> {ip}");
            }
        }
    }

    #[test]
    fn synthesis_matches_pointwise_harmonics() {
        let g = SphereGrid::new(9).unwrap();
        for (l, m) in [(0usize, 0i64), (1, 0), (1, 1), (1, -1), (4, 3), (9, -7)] {
            let mut c = vec![0.0; g.coeff_count()];
            c[SphereGrid::index(l, m)] = 1.0;
            let vals = g.synthesize(&c);
            for idx in [0, 17, 55, g.node_count() - 1] {
                let (t, p) = g.node(idx);
                assert!((vals[idx] - real_harmonic(l, m, t, p)).abs() < 1e-12);
                assert!((g.evaluate_at(&c, t, p) - vals[idx]).abs() < 1e-12);
            }
            let back = g.analyze(&vals);
            for (i, v) in back.iter().enumerate() {
                assert!((v - c[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn derivative_tables_match_finite_differences() {
        let g = SphereGrid::new(8).unwrap();
        let mut c = vec![0.0; g.coeff_count()];
        for (i, v) in c.iter_mut().enumerate() {
            *v = ((i * 7 % 11) as f64 - 5.0) / 7.0;
        }
        let dth = g.synthesize_dtheta(&c);
        let dph = g.synthesize_dphi_over_sin(&c);
        let h = 1e-6;
        for idx in [3, 40, 101] {
            let (t, p) = g.node(idx);
            let fd_t = (g.evaluate_at(&c, t + h, p) - g.evaluate_at(&c, t - h, p)) / (2.0 * h);
            let fd_p = (g.evaluate_at(&c, t, p + h) - g.evaluate_at(&c, t, p - h)) / (2.0 * h);
            assert!((fd_t - dth[idx]).abs() < 1e-7, "{fd_t} vs {}", dth[idx]);
            assert!((fd_p / t.sin() - dph[idx]).abs() < 1e-7);
        }
    }
}
