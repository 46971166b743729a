//! Pseudo-spectral simulation of the viscous stochastic rotating shallow
//! water system on the torus with transport (SALT) noise, plus numerical
//! checks of its a priori estimates.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod initial;
pub mod io;
pub mod noise;
pub mod physics;
pub mod picard;
pub mod spectral;
pub mod stepper;
pub mod verify;

pub use error::{Result, SrswError};
