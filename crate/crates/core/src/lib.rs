//! Collision-aware inverse kinematics for arms sharing a workspace.
//!
//! Each controlled arm runs its own solver. Neighbouring arms are only seen
//! through their current joint states and are treated as moving obstacles.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ad;
pub mod costs;
pub mod error;
pub mod geom;
pub mod harness;
pub mod kinematics;
pub mod model;
pub mod proximity;
pub mod solver;

pub use error::{Error, Result};
