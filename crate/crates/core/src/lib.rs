//! Light-cone lattice solver for the 1+1 dimensional Maxwell-Dirac system in
//! null-component form, with the diagnostics used to check its estimates.

// `!(x >= 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod diagnostics;
pub mod dirac_step;
pub mod error;
pub mod experiments;
pub mod field;
pub mod grid;
pub mod initial_data;
pub mod wave_step;

pub use error::{Error, Result};
pub use field::{GaugeField, SpinorField};
pub use grid::{make_grid, Boundary, ConeRegion, GridSpec};
pub use initial_data::InitialData;
