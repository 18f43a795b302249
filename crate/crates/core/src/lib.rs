#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

//! Tactile two-finger grasp control with force-closure certification and a
//! 1-D contact plant for offline experiments.

pub mod closure;
pub mod controller;
pub mod error;
pub mod harness;
pub mod lp;
pub mod math;
pub mod plant;
pub mod sensor;

pub use error::GraspError;
