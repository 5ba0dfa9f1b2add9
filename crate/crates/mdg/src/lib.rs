//! Command line driver, file formats and sparse direct solver for the
//! `mdg-core` Brinkman discretization.

pub mod config;
pub mod csv;
pub mod direct;
pub mod error;
pub mod run;
pub mod solve;
pub mod vtu;

pub use mdg_core as core;
