//! Numerical laboratory for the fractional Laplacian on bounded domains
//! perturbed by the critical Hardy potential `c|x|^{-α}`.
//!
//! The crate is organised bottom-up:
//!
//! * [`specfun`] closed-form constants (Gamma ratios, the coupling map `F`,
//!   the sharp Hardy constant),
//! * [`geometry`] cell-centred grids on intervals, rectangles and disks,
//! * [`fracop`] dense assembly of the restricted fractional Laplacian and its
//!   Schrödinger and Green matrices,
//! * [`spectral`] eigen-solves and heat kernels,
//! * [`doob`] the ground-state (`w`-) transform,
//! * [`riesz`] operator-free quadrature of Riesz potentials of power laws,
//! * [`analysis`] exponent fits and the estimate checks built on top of all
//!   of the above.

pub mod analysis;
pub mod doob;
mod error;
pub mod fracop;
pub mod geometry;
pub mod par;
pub mod quad;
pub mod report;
pub mod riesz;
pub mod specfun;
pub mod spectral;

pub use error::{Error, Result};
pub use geometry::{DomainSpec, Grid};
pub use par::Execution;
pub use specfun::{ModelParams, SpectralConstants};
