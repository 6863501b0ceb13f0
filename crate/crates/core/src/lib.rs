//! ECG biometric authentication built on RR-interval framing.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`signal`]: load or synthesize an ECG trace and remove its baseline.
//! 2. [`beat`]: find R-peaks and resample each RR interval into a fixed-length frame.
//! 3. [`learners`]: fit a per-entity decision-tree reference function (position to mV),
//!    with a Gaussian-kernel SVR/SVM baseline for comparison.
//! 4. [`authcore`]: derive MSE quality statistics and the mean + 3σ control limit,
//!    persist the reference database and make known/unknown decisions.
//! 5. [`evalx`]: run randomized trials, tally confusion matrices, compute accuracy,
//!    overall performance and sweep the control limit.
//!
//! [`infotheory`] ranks frame positions by histogram mutual information with the
//! entity label. [`cohort`] generates reproducible synthetic subject cohorts.

pub mod authcore;
pub mod beat;
pub mod cli;
pub mod cohort;
pub mod error;
pub mod evalx;
pub mod infotheory;
pub mod learners;
pub mod signal;

pub use error::{Error, Result};

/// Default number of samples per RR frame.
pub const DEFAULT_FRAME_LEN: usize = 220;
