//! Implicit time marching for linear radiative transfer with source
//! iteration, diffusion synthetic acceleration and on-the-fly reduced-order
//! acceleration.

pub mod cli;
pub mod dg;
pub mod dsa;
pub mod error;
pub mod linalg;
pub mod mesh;
pub mod operators;
pub mod orchestrator;
pub mod quadrature;
pub mod report;
pub mod rom;
pub mod scenario;
pub mod si;
pub mod sweep;

pub use error::{Error, Result};
