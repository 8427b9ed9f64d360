//! Quantum phase-space constructions with a grid oracle.

pub mod density;
pub mod error;
pub mod fock;
pub mod grid;
pub mod io;
pub mod joint;
pub mod metric;
pub mod numerics;
pub mod phase;
pub mod psop;
pub mod verify;

pub use error::{Error, Result};
pub use numerics::C64;
