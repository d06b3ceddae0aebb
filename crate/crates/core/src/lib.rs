//! Rotating shallow-water dynamical core with a generative property-testing
//! harness built from geophysical fluid dynamics theory.
//!
//! The crate is `no_std` (it needs `alloc`). Everything here is a pure
//! function of its inputs; IO, clocks and threads live in the `gfdprop`
//! companion crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod balance;
pub mod checkpoint;
pub mod diagnostics;
pub mod dynamics;
pub mod error;
pub mod field;
pub mod gen;
pub mod grid;
pub(crate) mod math;
pub mod oracle;
pub mod params;
pub mod state;
pub mod suites;
pub mod waves;

pub use error::{Error, Result};
pub use field::Field;
pub use grid::{Boundary, Grid};
pub use params::PhysParams;
pub use state::State;
