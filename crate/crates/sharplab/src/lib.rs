//! A desk-scale laboratory for sharpness-aware training.
//!
//! The crate implements plain (SAM) and micro-batch averaged (mSAM)
//! sharpness-aware gradients over small differentiable models, together
//! with the machinery to study them: base optimizers with a one-cycle
//! schedule, dominant-Hessian-eigenvalue diagnostics via power iteration,
//! deterministic synthetic and IDX datasets, and an experiment harness for
//! mode comparisons, varying-m sweeps, hybrid switching and runtime
//! measurement. Everything is seeded and reproducible: identical configs
//! and seeds give identical results down to the bit, wall-clock fields
//! aside.

pub mod cli;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod optim;
pub mod seeding;

pub use error::{Error, Result};
pub use model::{Activation, LossConfig, Mlp, ModelSpec, Objective, ParamVector, Sample};
pub use optim::{
    msam_gradient, partition_minibatch, sam_gradient, sam_perturbation, SharpnessConfig,
};
