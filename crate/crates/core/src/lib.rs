//! Spectral functional calculus for `[1 + a(-Δ)]^{s/2}` on periodic grids.

// Negated comparisons reject NaN parameters along with out-of-range ones.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod calculus;
pub mod cli;
pub mod config;
pub mod error;
pub mod field_io;
pub mod grid;
pub mod ladder;
pub mod multipliers;
pub mod presets;
pub mod report;
pub mod solvers;
pub mod symbols;
pub mod transform;

pub use error::{Error, Result};
pub use grid::{lp_norm, make_grid, radial_defect, radial_project, Field, Grid, SpectralField};
pub use ladder::SampleLadder;
pub use symbols::{check_class, check_ellipticity, class_nesting_check, exp_symbol, fractional_symbol, laplace_symbol, Symbol};
pub use transform::{forward_transform, inverse_transform};
