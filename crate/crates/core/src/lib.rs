//! Polar finite-difference laboratory for `-Laplacian u + b^(alpha) . grad u = g`
//! on the unit disk with `b^(alpha) = b - alpha x / |x|^2`, `div b = 0` and zero
//! Dirichlet data.
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.

#![cfg_attr(not(any(feature = "std", test)), no_std)]

extern crate alloc;

pub mod analysis;
pub mod discretize;
pub mod drift;
pub mod error;
pub mod field;
pub mod grid;
pub mod math;
pub mod profiles;
pub mod solve;
pub mod sparse;

pub use discretize::{assemble, assemble_radial_exact, bilinear_form, LinearSystem, ProblemSpec, RhsMode, Scheme};
pub use drift::{DivFree, DriftSpec, VectorFieldSample};
pub use error::{Error, Result};
pub use field::DiscreteField;
pub use grid::{build_disk_grid, Grid, RadialGrid};
pub use profiles::{FluxProfile, SourceProfile, StreamProfile, UStar};
pub use solve::{linear_solve, SolveReport};
