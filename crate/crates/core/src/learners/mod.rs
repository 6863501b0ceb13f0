//! Regression engines for reference functions.
//!
//! [`tree`] is the production model: a CART regression tree mapping frame
//! position (and optionally ranked amplitudes) to mV. [`kernel`] holds the
//! Gaussian-kernel SVM/SVR baseline. Both implement [`Regressor`], so
//! [`fit_report`] and [`empirical_risk`] treat them alike.

pub mod bench;
pub mod kernel;
pub mod tree;

use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::beat::RrFrame;
use crate::{Error, Result};

pub use kernel::{gaussian_kernel, train_svm_binary, train_svr, KernelMode, KernelModel, KernelParams};
pub use tree::{predict_dt, train_dt, DtModel, DtParams, Node};

pub trait Regressor {
    fn n_features(&self) -> usize;

    fn predict(&self, x: &[f64]) -> Result<f64>;
}

impl Regressor for DtModel {
    fn n_features(&self) -> usize {
        DtModel::n_features(self)
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        predict_dt(self, x)
    }
}

impl Regressor for KernelModel {
    fn n_features(&self) -> usize {
        KernelModel::n_features(self)
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.decision_value(x)
    }
}

/// Training summary in the units of the target (mV for reference functions).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitReport {
    pub rmse: f64,
    pub mae: f64,
    pub train_time_s: f64,
}

fn residuals(model: &dyn Regressor, x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.is_empty() {
        return Err(Error::NotEnoughData("no samples to evaluate".into()));
    }
    x.iter()
        .zip(y)
        .map(|(row, &t)| Ok(model.predict(row)? - t))
        .collect()
}

/// Mean absolute deviation `(1/l) Σ |f(x_i) - y_i|`.
pub fn empirical_risk(model: &dyn Regressor, x: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let r = residuals(model, x, y)?;
    Ok(r.iter().map(|e| e.abs()).sum::<f64>() / r.len() as f64)
}

pub fn fit_report(
    model: &dyn Regressor,
    x: &[Vec<f64>],
    y: &[f64],
    train_time: Duration,
) -> Result<FitReport> {
    let r = residuals(model, x, y)?;
    let n = r.len() as f64;
    let mse = r.iter().map(|e| e * e).sum::<f64>() / n;
    let mae = r.iter().map(|e| e.abs()).sum::<f64>() / n;
    Ok(FitReport {
        // sqrt of a mean square can round just below the mean absolute value.
        rmse: mse.sqrt().max(mae),
        mae,
        train_time_s: train_time.as_secs_f64(),
    })
}

/// How a reference model turns `(frame, position)` into a feature vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FeatureMap {
    /// The scalar position `j`.
    #[default]
    Position,
    /// `j` followed by the frame's amplitudes at the listed positions.
    PositionWithRanked { positions: Vec<usize> },
}

impl FeatureMap {
    pub fn dim(&self) -> usize {
        match self {
            FeatureMap::Position => 1,
            FeatureMap::PositionWithRanked { positions } => 1 + positions.len(),
        }
    }

    pub fn features(&self, frame: &[f64], position: usize) -> Vec<f64> {
        match self {
            FeatureMap::Position => vec![position as f64],
            FeatureMap::PositionWithRanked { positions } => {
                let mut v = Vec::with_capacity(1 + positions.len());
                v.push(position as f64);
                v.extend(positions.iter().map(|&p| frame[p]));
                v
            }
        }
    }

    /// Pools every `(features(frame, j), frame[j])` pair.
    pub fn training_set(&self, frames: &[RrFrame]) -> (Vec<Vec<f64>>, Vec<f64>) {
        let total = frames.iter().map(RrFrame::len).sum();
        let mut x = Vec::with_capacity(total);
        let mut y = Vec::with_capacity(total);
        for f in frames {
            for (j, &v) in f.values().iter().enumerate() {
                x.push(self.features(f.values(), j));
                y.push(v);
            }
        }
        (x, y)
    }

    pub(crate) fn validate(&self, frame_len: usize) -> Result<()> {
        if let FeatureMap::PositionWithRanked { positions } = self {
            if let Some(&p) = positions.iter().find(|&&p| p >= frame_len) {
                return Err(Error::param(
                    "features",
                    format!("ranked position {p} outside frame of length {frame_len}"),
                ));
            }
        }
        Ok(())
    }
}
