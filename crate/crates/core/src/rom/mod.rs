//! Streaming low-rank machinery: incremental SVD, DMD reduced operators and
//! the across-iteration predictor.

pub mod dmd;
pub mod isvd;
pub mod mh;

pub use dmd::{dmd_reduced_operator, reduced_solve, ReducedSystem, RomRole};
pub use isvd::{AppendPath, IncrementalSvd, SnapshotStore};
pub use mh::mh_fixed_point_predict;
