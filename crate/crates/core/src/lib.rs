//! Gaussian single-index models with quadratic and truncated-quadratic links:
//! sampling, losses, gradient dynamics, spectral estimators and trajectory
//! diagnostics.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod activation;
pub mod cutoff;
pub mod diagnostics;
pub mod error;
pub mod instance;
pub mod linalg;
pub mod losses;
pub mod optim;
pub mod quadrature;
pub mod rng;
pub mod spectral;

pub use activation::{Activation, ActivationKind};
pub use cutoff::{make_cutoff, CutoffFunction};
pub use error::{Error, Result};
pub use instance::{sample_instance, sample_sphere, Instance, ThetaStarMode};
pub use rng::SeedStream;
