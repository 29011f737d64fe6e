//! Gradient-variance analysis for unitarily embedded matrix product states.
//!
//! The crate is `no_std` with `alloc`. Everything that needs threads, files or
//! a terminal lives in the `plateau` crate; parallel sampling is injected
//! through [`mc::Executor`].
#![no_std]

extern crate alloc;

pub mod analytic;
pub mod ansatz;
pub mod circuit;
pub mod costs;
pub mod error;
pub mod linalg;
pub mod mc;
pub mod twirl;

pub use error::{Error, Result};
pub use linalg::{C64, ComplexMatrix, HermitianObservable, UnitaryGate};
