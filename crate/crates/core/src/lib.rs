//! Finite-scale coarse geometry and uniform Roe algebra toolkit: coarse
//! structures, band operators, Cartan pairs, reconstruction of a coarse
//! structure from its Cartan data, and recovery of the bijection behind a
//! unitary that conjugates one diagonal onto another.

pub mod algebra;
pub mod band_ops;
pub mod cli;
pub mod coarse_space;
pub mod error;
pub mod linalg;
pub mod matching;
pub mod reconstruction;
pub mod rigidity;

pub use error::{Error, Result};
