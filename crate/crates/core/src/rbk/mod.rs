//! Rigid blurring kernel: per-image latent codes decoded into screw motions
//! and composition weights, the screw geometry, and weighted color
//! composition.

mod compose;
mod geometry;
mod kernel;

pub use compose::{compose, compose_coarse, compose_fine, compose_on_tape, CompositionWeights};
pub use geometry::{
    rodrigues_coefficients, screw_exp, screw_to_transform, skew, transform_ray, RigidTransform,
    ScrewAxis, TAYLOR_THRESHOLD,
};
pub use kernel::{transform_rays_on_tape, KernelVars, Rbk, RbkConfig, RigidMotionSet};
