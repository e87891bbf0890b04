//! MorphAdapt: cross-morphology imitation on a desk-scale particle simulator.
//!
//! The pipeline converts teacher demonstrations recorded with `n` end-effectors
//! into trajectories for a student with `m` end-effectors, then trains an
//! improvement policy from the converted demonstrations:
//!
//! 1. [`tasks`] — task definitions, variant sampling, performance metrics and
//!    scripted teachers producing the teacher dataset.
//! 2. [`dynamics`] — a learned spatio-temporal forward model predicting
//!    per-particle displacements, trained on random pick-and-place rollouts.
//! 3. [`trajopt`] — gradient-free trajectory optimization (CEM / CMA-ES /
//!    MPPI / random) over the learned model to find student actions matching
//!    each demonstration's goal state, replayed in the true simulator.
//! 4. [`lfd`] — an advantage-weighted actor-critic seeded with the optimized
//!    demonstrations.
//!
//! [`sim`] provides the deterministic position-based particle engine behind
//! everything, and [`harness`] the CLI, configuration, persistence and
//! ablation runner.

pub mod dynamics;
pub mod error;
pub mod harness;
pub mod lfd;
pub mod nn;
pub mod rng;
pub mod sim;
pub mod tasks;
pub mod trajopt;

pub use error::{Error, Result};
