//! Inverse blendshape-rig fitting.
//!
//! Given a target face mesh and a blendshape rig with corrective terms, the
//! solvers in this crate recover a sparse activation-weight vector in
//! `[0, 1]^m`. The main method is box-projected coordinate descent on an
//! L1-regularized least-squares objective, evaluated against classic
//! baselines (sequential greedy fitting, pseudoinverse, and ridge solves),
//! plus the evaluation metrics and synthetic benchmark data needed to compare
//! them.
//!
//! Modules:
//! - [`rig`]: the blendshape model and its per-coordinate decomposition
//! - [`solvers`]: coordinate descent and the baseline solvers
//! - [`ordering`]: coordinate-visit-order strategies
//! - [`metrics`]: mesh-error, sparsity, and temporal-smoothness metrics
//! - [`dataio`]: file formats, synthetic rig/sequence generation, noise

pub mod dataio;
pub mod error;
mod linalg;
pub mod metrics;
pub mod ordering;
pub mod rig;
pub mod solvers;

pub use error::{Error, Result};
pub use rig::{BlendshapeRig, CorrectiveTerm, Mesh, WeightVector};
