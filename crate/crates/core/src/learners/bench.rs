//! Side-by-side fit of the tree and the kernel regressor on the same pairs.

use std::fmt::Write as _;
use std::time::Instant;

use super::{fit_report, train_dt, train_svr, DtParams, FitReport, KernelParams};
use crate::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchReport {
    pub dt: FitReport,
    pub svr: FitReport,
    pub n_train: usize,
    pub n_eval: usize,
}

/// Trains both models on `(x, y)` and reports errors on `(eval_x, eval_y)`.
pub fn compare(
    x: &[Vec<f64>],
    y: &[f64],
    eval_x: &[Vec<f64>],
    eval_y: &[f64],
    dt_params: DtParams,
    kernel_params: KernelParams,
) -> Result<BenchReport> {
    let t0 = Instant::now();
    let dt = train_dt(x, y, dt_params)?;
    let dt_time = t0.elapsed();

    let t0 = Instant::now();
    let svr = train_svr(x, y, kernel_params)?;
    let svr_time = t0.elapsed();

    Ok(BenchReport {
        dt: fit_report(&dt, eval_x, eval_y, dt_time)?,
        svr: fit_report(&svr, eval_x, eval_y, svr_time)?,
        n_train: x.len(),
        n_eval: eval_x.len(),
    })
}

impl BenchReport {
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<20}{:>16}{:>16}", "", "DT (fine tree)", "SVR (gaussian)");
        let rows = [
            ("RMSE (mV)", self.dt.rmse, self.svr.rmse),
            ("MAE (mV)", self.dt.mae, self.svr.mae),
            ("Training Time (s)", self.dt.train_time_s, self.svr.train_time_s),
        ];
        for (name, a, b) in rows {
            let _ = writeln!(out, "{name:<20}{a:>16.5}{b:>16.5}");
        }
        out
    }

    pub fn to_csv(&self) -> String {
        format!(
            "metric,dt,svr\nrmse_mv,{},{}\nmae_mv,{},{}\ntrain_time_s,{},{}\n",
            self.dt.rmse,
            self.svr.rmse,
            self.dt.mae,
            self.svr.mae,
            self.dt.train_time_s,
            self.svr.train_time_s
        )
    }
}
