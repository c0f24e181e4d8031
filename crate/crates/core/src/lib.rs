//! Mild solutions of the 3D Navier–Stokes system with singular forces,
//! computed symbol-side in pseudomeasure spaces.
//!
//! Fields live on a truncated Fourier lattice ([`grid`]); the mild
//! formulation's operators are Fourier multipliers ([`operators`]); solutions
//! are built by a certified quadratic fixed-point iteration ([`solver`]).

pub mod asymptotics;
pub mod cli;
pub mod error;
pub mod fft;
pub mod forces;
pub mod grid;
pub mod landau;
pub mod norms;
pub mod operators;
pub mod pmns;
pub mod quadrature;
pub mod solver;

pub use error::{PmError, Result};
pub use forces::{ForceSpec, TrajectorySpec};
pub use grid::{build_grid, FourierVectorField, GridSpec, PhysicalVectorField};
pub use norms::{NormBand, SpaceTimeField};
pub use operators::TimeGrid;
