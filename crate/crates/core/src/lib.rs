//! Simulation and verification toolkit for the linear stochastic heat
//! equation ∂u/∂t = ∂²u/∂x² + Ẇ on [0,1] with zero initial data.

pub mod error;
pub mod green;
pub mod quad;
pub mod smooth;

pub use error::{Error, Result};
pub mod field;
pub mod rng;
pub mod constraint;
pub mod suprema;
pub mod seminorm;
pub mod malliavin;
pub mod stats;
pub mod density;
pub mod config;
pub mod experiments;
