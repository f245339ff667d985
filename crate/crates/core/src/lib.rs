//! Geometry, kinematics, gripper fitting and self-distillation math for
//! aligning human and robot demonstrations.
//!
//! The crate is `no_std` (with `alloc`); file formats and the command line
//! live in the `embodi` crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod distill;
pub mod error;
pub mod filter;
pub mod geometry;
pub mod gripper;
pub mod kinematics;
pub mod scene;
pub mod toy;

pub use error::{Error, Result};
