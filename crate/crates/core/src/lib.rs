//! Execution-Cache-Memory (ECM) performance model engine.
//!
//! - [`model`]: composition of in-core and transfer times into per-level
//!   predictions, performance, saturation and scaling.
//! - [`shorthand`]: the `{T_OL || T_nOL | ...}` notation.
//! - [`incore`]: T_OL / T_nOL from instruction mixes and dependency chains.
//! - [`catalog`]: machine and kernel description files and built-ins.
//! - [`kernels`]: reference naive and Kahan dot products, exact oracle,
//!   ill-conditioned data.
//! - [`bench`]: working-set sweeps, thread scaling and model comparison.

pub mod bench;
pub mod catalog;
pub mod incore;
pub mod kernels;
pub mod model;
pub mod shorthand;
