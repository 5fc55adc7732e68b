//! Sweep engine, threshold/time fits, frozen CSV formats and the `sil`
//! command-line interface built on `sil-core`.

// Parameter checks are written `!(x > 0.0)` on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod output;
pub mod sweep;

pub use cli::run_cli;
pub use config::SweepConfig;
pub use error::{Error, Result};
pub use fit::{threshold_fit, time_fit, FitKind, ThresholdFit};
pub use sweep::{run_sweep, run_trial, CellSummary, CurvePoint, SweepOutcome, TrialRecord};
