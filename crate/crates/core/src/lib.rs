//! Numerical laboratory for Abelian Higgs vortices on a two-sphere with an
//! arbitrary conformal metric, their moduli-space metrics and spectra.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bundle;
pub mod eigen;
pub mod error;
pub mod experiment;
pub mod fit;
pub mod moduli;
pub mod spectral;
pub mod sphere;
pub mod vortex;

pub use error::{Error, Result};
