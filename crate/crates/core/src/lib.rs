//! Interior-point optimization over the quantum relative entropy cone.

pub mod cones;
pub mod error;
pub mod families;
pub mod ipm;
pub mod linalg;
pub mod matcalc;
pub mod qkd;
pub mod qre_barrier;
pub mod twophase;

pub use error::{Error, Result, Violation};
