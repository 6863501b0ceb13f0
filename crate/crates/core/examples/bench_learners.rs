//! Fit the decision tree and the gaussian-kernel regressor to one subject's
//! (position, amplitude) pairs and compare error and training time.
//!
//! `cargo run --release --example bench_learners`

use rrif_auth::authcore::{extract_frames, FrameParams};
use rrif_auth::cohort::{generate_cohort, CohortSpec};
use rrif_auth::learners::bench::compare;
use rrif_auth::learners::{DtParams, FeatureMap, KernelParams};

fn main() -> rrif_auth::Result<()> {
    let subject = &generate_cohort(&CohortSpec::new(1, 0, 9))?[0];
    let frames = extract_frames(&subject.record(50.0, 360.0, 0)?, 220, &FrameParams::default())?;
    let (x, y) = FeatureMap::Position.training_set(frames.frames());

    // Every sixth pair keeps the kernel solve quick.
    let tx: Vec<Vec<f64>> = x.iter().step_by(6).cloned().collect();
    let ty: Vec<f64> = y.iter().step_by(6).copied().collect();
    let kernel = KernelParams {
        standardize: true,
        ..KernelParams::default()
    };
    let report = compare(&tx, &ty, &x, &y, DtParams::default(), kernel)?;
    println!("{} training pairs, {} evaluation pairs", report.n_train, report.n_eval);
    print!("{}", report.to_table());
    Ok(())
}
