//! Time-periodic "pure tone" solutions of the one-dimensional compressible
//! Euler equations in Lagrangian coordinates, posed over a stationary
//! entropy profile.
//!
//! The crate is layered bottom-up:
//!
//! * [`thermo`]: constitutive laws, the quiet state and the scaling map to
//!   dimensionless variables.
//! * [`profiles`]: piecewise-constant and sampled entropy profiles and the
//!   inverse wavespeed they induce.
//! * [`timeseries`]: truncated Fourier series in time together with the
//!   reflection, shift, parity and jump operators.
//! * [`lindiv`]: linearized small divisors for piecewise-constant profiles,
//!   base frequencies and resonance classification.
//! * [`sturm`]: Prüfer integration of the Sturm-Liouville system for
//!   arbitrary profiles, eigenfrequencies and the second-order coefficient
//!   that drives the bifurcation.
//! * [`evolve`]: nonlinear evolution in the material coordinate and the
//!   boundary operators whose zeros are periodic solutions.
//! * [`bifurcate`]: the Liapunov-Schmidt solver producing pure tone
//!   solutions.
//! * [`tile`]: reflection tiling of a solved tile into a spatially periodic
//!   solution, with residual checks and export.
//! * [`recipes`]: serializable problem descriptions and bundled recipes.
//!
//! Data-parallel loops go through [`exec`], which uses rayon when the
//! `parallel` feature is enabled and a plain sequential loop otherwise.

// Validation is written as `!(x > 0.0)` throughout so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bifurcate;
pub mod error;
pub mod evolve;
pub mod exec;
pub mod lindiv;
pub mod profiles;
pub mod recipes;
pub mod sturm;
pub mod thermo;
pub mod tile;
pub mod timeseries;

pub use error::{Error, Result};

/// Version of this library, recorded in report provenance.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
