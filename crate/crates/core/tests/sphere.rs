use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;
use vortex_moduli::eigen;
use vortex_moduli::sphere::{
    real_harmonic, solve_helmholtz, solve_poisson, GridFunction, RhoTerm, SphereGrid, SurfaceMetric,
};

fn grid(l: usize) -> Arc<SphereGrid> {
    Arc::new(SphereGrid::new(l).unwrap())
}

/// Composite Simpson rule on `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(a + i as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn bumped_area_matches_independent_quadrature() {
    let m = SurfaceMetric::from_rho_terms(grid(31), &[RhoTerm::from((1, 0, 0.1))]).unwrap();
    let got = m.integrate(&GridFunction::constant(m.grid(), 1.0)).unwrap();
    // ρ = 0.1·√(3/4π)·cos θ is axisymmetric: 2π∫ e^{2ρ} sin θ dθ in closed form
    let a = 0.2 * (3.0 / (4.0 * PI)).sqrt();
    let closed = 2.0 * PI * (a.exp() - (-a).exp()) / a;
    let simpson_value = 2.0 * PI * simpson(|t| (a * t.cos()).exp() * t.sin(), 0.0, PI, 20_000);
    assert!((closed - simpson_value).abs() < 1e-10);
    assert!((got - closed).abs() < 1e-8, "{got} vs {closed}");
}

#[test]
fn helmholtz_matches_finite_difference_oracle() {
    // a = |Y10| is axisymmetric and b = Y22 ∝ cos 2φ, so v = f(θ) cos 2φ with
    // −(sin θ f')'/sin θ + 4f/sin²θ + a f = b, solved by second-order finite
    // differences on a fine colatitude grid.
    let g = grid(63);
    let m = SurfaceMetric::round(g.clone());
    let a = GridFunction::harmonic(&g, 1, 0).map(f64::abs);
    let b = GridFunction::harmonic(&g, 2, 2);
    let v = solve_helmholtz(&a, &b, &m).unwrap().solution;

    let t0 = 0.7;
    assert!(
        (real_harmonic(2, 2, t0, 0.3) - real_harmonic(2, 2, t0, 0.0) * 0.6f64.cos()).abs() < 1e-14
    );
    let n = 8000;
    let h = PI / n as f64;
    let theta: Vec<f64> = (0..=n).map(|i| i as f64 * h).collect();
    let inner = n - 1;
    let (mut lo, mut di, mut up, mut rhs) = (
        vec![0.0; inner],
        vec![0.0; inner],
        vec![0.0; inner],
        vec![0.0; inner],
    );
    for k in 0..inner {
        let t = theta[k + 1];
        let (sm, sp, s) = ((t - 0.5 * h).sin(), (t + 0.5 * h).sin(), t.sin());
        let a_t = (3.0 / (4.0 * PI)).sqrt() * t.cos().abs();
        lo[k] = -sm / (s * h * h);
        up[k] = -sp / (s * h * h);
        di[k] = (sm + sp) / (s * h * h) + 4.0 / (s * s) + a_t;
        rhs[k] = real_harmonic(2, 2, t, 0.0);
    }
    // Thomas algorithm
    for k in 1..inner {
        let w = lo[k] / di[k - 1];
        di[k] -= w * up[k - 1];
        rhs[k] -= w * rhs[k - 1];
    }
    let mut f = vec![0.0; n + 1];
    f[inner] = rhs[inner - 1] / di[inner - 1];
    for k in (0..inner - 1).rev() {
        f[k + 1] = (rhs[k] - up[k] * f[k + 2]) / di[k];
    }
    let mut worst = 0.0f64;
    for (i, (t, p)) in g.nodes().enumerate() {
        let x = t / h;
        let j = (x.floor() as usize).min(n - 1);
        let frac = x - j as f64;
        let ft = f[j] * (1.0 - frac) + f[j + 1] * frac;
        worst = worst.max((v.values()[i] - ft * (2.0 * p).cos()).abs());
    }
    assert!(worst < 1e-5, "{worst}");
}

#[test]
fn lambda1_is_resolution_independent() {
    let rho = [RhoTerm::from((2, 0, 0.2))];
    let a = SurfaceMetric::from_rho_terms(grid(31), &rho)
        .unwrap()
        .lambda1()
        .unwrap();
    let b = SurfaceMetric::from_rho_terms(grid(63), &rho)
        .unwrap()
        .lambda1()
        .unwrap();
    assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    let dense = eigen::solver("dense")
        .unwrap()
        .lowest(&SurfaceMetric::from_rho_terms(grid(31), &rho).unwrap(), 2)
        .unwrap();
    assert!((dense[1] - a).abs() < 1e-9);
}

#[test]
fn c0_of_y10_matches_dense_sampling() {
    let g = grid(31);
    let m = SurfaceMetric::round(g.clone());
    let y = GridFunction::harmonic(&g, 1, 0);
    let c0 = m.norms(&y).unwrap().c0;
    let sampled = (0..=20_000)
        .map(|i| real_harmonic(1, 0, PI * i as f64 / 20_000.0, 0.0).abs())
        .fold(0.0, f64::max);
    assert!((c0 - (3.0 / (4.0 * PI)).sqrt()).abs() < 1e-10);
    assert!((c0 - sampled).abs() < 1e-10);
}

fn band_limited(band: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, (band + 1) * (band + 1))
}

fn rho_terms() -> impl Strategy<Value = Vec<RhoTerm>> {
    prop::collection::vec((1usize..4, -0.25f64..0.25), 0..3).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (l, val))| RhoTerm::from((l, (i as i64 % (l as i64 + 1)), val)))
            .collect()
    })
}

fn padded(g: &SphereGrid, c: &[f64]) -> GridFunction {
    let mut full = vec![0.0; g.coeff_count()];
    full[..c.len()].copy_from_slice(c);
    GridFunction::from_coeffs(g, &full)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn quadrature_is_exact_for_harmonic_products(l1 in 0usize..16, l2 in 0usize..16, s1 in 0usize..33, s2 in 0usize..33) {
        let g = grid(15);
        let m1 = (s1 % (2 * l1 + 1)) as i64 - l1 as i64;
        let m2 = (s2 % (2 * l2 + 1)) as i64 - l2 as i64;
        let a = GridFunction::harmonic(&g, l1, m1);
        let b = GridFunction::harmonic(&g, l2, m2);
        let total: f64 = a.values().iter().zip(b.values()).zip(g.weights()).map(|((x, y), w)| x * y * w).sum();
        let expected = if (l1, m1) == (l2, m2) { 1.0 } else { 0.0 };
        prop_assert!((total - expected).abs() < 1e-10);
    }

    #[test]
    fn laplacian_is_self_adjoint_and_positive(f in band_limited(11), h in band_limited(11), rho in rho_terms()) {
        let g = grid(23);
        let m = SurfaceMetric::from_rho_terms(g.clone(), &rho).unwrap();
        let (f, h) = (padded(&g, &f), padded(&g, &h));
        let lf = m.laplace_beltrami(&f).unwrap();
        let lh = m.laplace_beltrami(&h).unwrap();
        let a = m.integrate(&f.zip_map(&lh, |x, y| x * y)).unwrap();
        let b = m.integrate(&h.zip_map(&lf, |x, y| x * y)).unwrap();
        prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0));
        let q = m.integrate(&f.zip_map(&lf, |x, y| x * y)).unwrap();
        prop_assert!(q >= -1e-10);
    }

    #[test]
    fn poisson_inverts_laplacian(f in band_limited(11), rho in rho_terms()) {
        let g = grid(23);
        let m = SurfaceMetric::from_rho_terms(g.clone(), &rho).unwrap();
        let f = padded(&g, &f);
        let mean = m.integrate(&f).unwrap() / m.area();
        let f0 = f.map(|x| x - mean);
        let back = solve_poisson(&m.laplace_beltrami(&f0).unwrap(), &m).unwrap().solution;
        let err = back.values().iter().zip(f0.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        prop_assert!(err < 1e-8, "{}", err);
    }

    #[test]
    fn c0_never_drops_under_refinement(f in band_limited(7)) {
        let coarse = grid(15);
        let fine = grid(31);
        let a = SurfaceMetric::round(coarse.clone()).norms(&padded(&coarse, &f)).unwrap().c0;
        let b = SurfaceMetric::round(fine.clone()).norms(&padded(&fine, &f)).unwrap().c0;
        prop_assert!(b >= a - 1e-8, "{} then {}", a, b);
    }
}
