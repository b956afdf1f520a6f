//! Numerical lab for the counting-functional approach to the Gross-Pitaevskii
//! limit of a one-dimensional Bose gas on a periodic grid.

pub mod error;
pub mod functionals;
pub mod gp;
pub mod harness;
pub mod lattice;
pub mod manybody;
pub mod projector;
mod tensor;

pub use error::{Error, Result};
pub use gp::{GpConvention, Orbital};
pub use lattice::{Field, Grid, InteractionShape, InteractionSpec};
pub use manybody::{ManyBodyState, TrapSpec};
pub use projector::WeightFunction;
