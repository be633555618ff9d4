//! Adaptive set observers for LPV systems with bounded uncertainty: interval
//! estimates of unknown parameters and states, the on-line checks that
//! certify them, and fault indicators built on top.

pub mod error;
pub mod faults;
pub mod model;
pub mod monotone;
pub mod numerics;
pub mod observers;
pub mod scenarios;
pub mod sim;
pub mod verifier;

pub use error::{Error, Result};
