//! Conditional preference-based treatment effects (CPTE).
//!
//! For a preference function `w(y | y')` the CPTE at covariates `x` is
//! `q_W(x) = E[w(Y_i(1) | Y_j(0)) | X_i = X_j = x]`, the expected preference of a
//! treated outcome over an independent control outcome at the same covariates.
//! The crate provides
//!
//! * [`preference`]: preference functions and their orientation,
//! * [`synthgen`]: synthetic generating processes with closed-form oracles,
//! * [`distest`]: distributional estimators of `q_W` and `q_L`,
//! * [`policy`]: plug-in and one-step policy values and policy learning,
//! * [`harness`]: repeated experiments with held-out oracle evaluation.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod data;
pub mod distest;
pub mod error;
pub mod harness;
pub mod linalg;
pub(crate) mod par;
pub mod policy;
pub mod preference;
pub mod rng;
pub mod stats;
pub mod synthgen;

pub use data::{Arm, Dataset, Matrix, Standardizer};
pub use error::{CpteError, Result};
pub use preference::{Preference, PreferenceKind};
