//! Pseudospectral discretisation of conformal metrics on the two-sphere.

mod grid;
mod metric;
mod solve;

pub use grid::{real_harmonic, SphereGrid};
pub use metric::{GridFunction, Norms, RhoTerm, SurfaceMetric};
pub use solve::{solve_helmholtz, solve_poisson, LinearSolution};

pub(crate) use metric::{dirichlet_of_coeffs, round_laplacian};
pub(crate) use solve::{dot, helmholtz_galerkin, invert_round_laplacian};
