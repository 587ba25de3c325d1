//! Radiance fields trained from blurred multi-view images.
//!
//! The crate bundles a small reverse-mode autodiff engine, a NeRF-style
//! radiance field with volume rendering, a rigid screw-motion blur kernel,
//! a per-pixel adaptive weight proposal, the joint trainer, and a synthetic
//! blur harness for generating and scoring ground truth.

pub mod autodiff;
pub mod awp;
pub mod error;
pub mod field;
pub mod harness;
pub mod nn;
pub mod rbk;
pub mod train;

pub use error::{Error, Result};
