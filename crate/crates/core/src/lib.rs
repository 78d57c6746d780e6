//! Exact samplers and fixed-point numerics for interacting particle systems
//! on directed regular trees: coalescing particles, the majority voter model
//! and Ising Glauber dynamics with layer-dependent couplings.

// Negated float comparisons are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod clocks;
pub mod coalescing;
pub mod error;
pub mod guards;
pub mod ising;
pub mod mc;
pub mod spin;
pub mod stats;
pub mod tree;
pub mod voter;

pub use error::{Error, Result};
pub use guards::CostGuards;
pub use spin::Spin;
pub use stats::Estimate;
