//! Tooling for humanoid-object interaction (HOI) motion.
//!
//! The crate covers the whole offline pipeline:
//!
//! * [`motion`]: skeletons, poses, 6-DOF rotations, forward/inverse kinematics
//!   and kinematic velocities.
//! * [`keyaction`]: weighted minimax key-action extraction, interpolation back
//!   to dense motion, an exhaustive optimal oracle and training-window curation.
//! * [`geometry`]: triangle meshes, basis-point-set encoding, signed distance
//!   queries and contact labeling.
//! * [`diffusion`]: DDPM schedule, a small conditional denoiser with exact
//!   gradients, training, sampling and autoregressive long-horizon generation.
//! * [`tracking`]: observation assembly, tracking rewards, interaction early
//!   termination, a noise-injected oracle rollout and the fine-tuning filter.
//! * [`metrics`]: generation and tracking metrics plus report emission.
//! * [`format`]: the chunked motion container (text and binary).
//! * [`synth`]: a seeded procedural "carry the box" corpus generator.
//!
//! Data-parallel loops go through [`exec::Exec`], which uses rayon when the
//! `parallel` feature is enabled and falls back to plain iteration otherwise.

pub mod diffusion;
pub mod error;
pub mod exec;
pub mod format;
pub mod geometry;
pub mod keyaction;
pub mod metrics;
pub mod motion;
pub mod rng;
pub mod synth;
pub mod tracking;

pub use error::{Error, Result};
pub use exec::Exec;
