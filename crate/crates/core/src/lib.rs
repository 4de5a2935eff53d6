//! Lattice toolkit for the locally covariant free scalar field in 1+1
//! dimensions: classical solutions and their symplectic structure, the CCR
//! algebra, quasifree vacuum states, the gauge group of a multiplet of
//! fields and a numerical classifier of its symmetries.

pub mod ccr;
pub mod classical;
pub mod classifier;
pub mod error;
pub mod gauge;
pub mod lattice;
pub mod linalg;
pub mod observables;
pub mod sampling;
pub mod state;

pub use error::{Error, Result};
