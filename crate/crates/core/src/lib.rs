#![no_std]

extern crate alloc;

mod math;

pub mod counterexamples;
pub mod dft;
pub mod error;
pub mod extension;
pub mod inverse;
pub mod kernel;
pub mod lattice;
pub mod quad;
pub mod specfun;

pub use error::{Error, Result};
