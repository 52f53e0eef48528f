use std::f64::consts::PI;
use std::sync::Arc;

use vortex_moduli::bundle::{constant_curvature_weight, HermitianStructure};
use vortex_moduli::fit::fit_convergence_order;
use vortex_moduli::spectral::{
    compare_spectra, fs_degeneracy, fs_phi, fs_spectrum, laplace_spectrum, moduli_metric_field,
    ratio_bounds, ModuliMetricField,
};
use vortex_moduli::sphere::{RhoTerm, SphereGrid, SurfaceMetric};

fn structure(l: usize, rho: &[RhoTerm]) -> HermitianStructure {
    let g = Arc::new(SphereGrid::new(l).unwrap());
    constant_curvature_weight(Arc::new(SurfaceMetric::from_rho_terms(g, rho).unwrap()), 1).unwrap()
}

#[test]
fn fs_reference_and_bounds() {
    for k in 0..10 {
        assert_eq!(fs_degeneracy(1, k), 2 * k + 1);
    }
    let s = fs_spectrum(2, 1).unwrap();
    assert_eq!((s.clusters[1].value, s.clusters[1].degeneracy), (12.0, 8));
    let b = ratio_bounds(1.0, 0.1, 1).unwrap();
    assert!((b.lower - 0.743_801_652_892_562).abs() < 1e-12);
    assert!((b.upper - 1.358_024_691_358_024_6).abs() < 1e-12);
}

#[test]
fn fs_field_reproduces_the_reference_spectrum() {
    let field = ModuliMetricField::fubini_study(Arc::new(SphereGrid::new(23).unwrap()));
    for solver in ["dense", "subspace"] {
        let s = laplace_spectrum(&field, 5, solver).unwrap();
        assert!(s.eigenvalues[0].abs() <= 1e-8 * s.eigenvalues[1]);
        let reference = fs_spectrum(1, 5).unwrap();
        for (c, r) in s.clusters.iter().zip(&reference.clusters) {
            assert_eq!(c.degeneracy, r.degeneracy);
            assert!((c.value - r.value).abs() <= 1e-9 * r.value.max(1.0));
        }
    }
}

#[test]
fn round_domain_gives_the_fs_metric() {
    let h = structure(31, &[]);
    let grid = Arc::new(SphereGrid::new(7).unwrap());
    for eps in [0.2, 0.025] {
        let f = moduli_metric_field(eps, &h, grid.clone()).unwrap();
        assert!(f.relative_variation() <= 1e-6);
        assert!((f.volume() - PI * eps).abs() <= 0.01 * PI * eps);
        for (v, (t, _)) in f.phi.values().iter().zip(grid.nodes()) {
            assert!((v / fs_phi(t) - 1.0).abs() <= 1e-6);
        }
    }
}

#[test]
fn bumped_spectrum_converges_at_first_order() {
    let h = structure(31, &[RhoTerm::from((1, 0, 0.3))]);
    let reference = fs_spectrum(1, 5).unwrap();
    let coarse = Arc::new(SphereGrid::new(7).unwrap());
    let fine = Arc::new(SphereGrid::new(11).unwrap());
    let mut pts = Vec::new();
    for eps in [0.2, 0.1, 0.05, 0.025] {
        let f = moduli_metric_field(eps, &h, fine.clone()).unwrap();
        let g = moduli_metric_field(eps, &h, coarse.clone()).unwrap();
        assert!(f.anisotropy <= 1e-3 && g.anisotropy <= 1e-3);
        assert!((f.volume() - PI * eps).abs() <= 0.02 * PI * eps);
        let s = laplace_spectrum(&f, 5, "subspace").unwrap();
        assert!(s.eigenvalues[0].abs() <= 1e-8 * s.eigenvalues[1]);
        let worst = compare_spectra(&s, &reference)
            .iter()
            .map(|r| (r.ratio - 1.0).abs())
            .fold(0.0, f64::max);
        pts.push((eps, worst));
    }
    for w in pts.windows(2) {
        assert!(w[1].1 < w[0].1, "{pts:?}");
    }
    let fit = fit_convergence_order(&pts).unwrap();
    assert!((0.8..=1.2).contains(&fit.slope), "{}", fit.slope);
}
