//! Mixed discontinuous Galerkin (MDG) discretization of the Brinkman
//! equations in pseudostress-velocity form on triangulations of the unit
//! square.
//!
//! The stress is approximated by discontinuous symmetric tensors of degree
//! `k + 1` and the velocity by discontinuous vectors of degree `k`. The
//! pressure is recovered afterwards as `p = -tr(sigma) / 2`.
//!
//! This crate is `no_std` (it needs `alloc`). File formats, the command line
//! driver and the sparse direct factorization live in the `mdg` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod assembly;
pub mod basis;
pub mod dense;
mod error;
pub(crate) mod math;
pub mod mesh;
pub mod postprocess;
pub mod problems;
pub mod quadrature;
pub mod solver;
pub mod space;
pub mod sparse;
pub mod tensor;

pub use error::{Error, Result};
pub use mesh::{AffineMap, Diagonal, EdgeRecord, Mesh};
pub use space::{ComponentKind, DgSpace, FieldCoefficients};
pub use tensor::SymTensorValue;
