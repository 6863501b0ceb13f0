//! Synthesise an ECG, remove the baseline, detect R peaks and cut RR frames.
//!
//! `cargo run --example synth_and_frame`

use rrif_auth::beat::{detect_rpeaks, frame_rr, DetectParams};
use rrif_auth::signal::{preprocess, synth_ecg, SubjectProfile, DEFAULT_BASELINE_WINDOW_S};

fn main() -> rrif_auth::Result<()> {
    let profile = SubjectProfile {
        rr_jitter: 0.03,
        noise_sd: 0.02,
        ..SubjectProfile::typical(72.0, 11)
    };
    let (record, truth) = synth_ecg(&profile, 30.0, 360.0)?;
    let clean = preprocess(&record, DEFAULT_BASELINE_WINDOW_S)?;
    let peaks = detect_rpeaks(&clean, DetectParams::default())?;

    let worst_ms = peaks
        .indices()
        .iter()
        .map(|&p| truth.iter().map(|&t| p.abs_diff(t)).min().unwrap_or(usize::MAX))
        .max()
        .unwrap_or(0) as f64
        / record.fs()
        * 1e3;
    println!(
        "{} s at {} Hz: {} true beats, {} detected, worst offset {worst_ms:.1} ms",
        record.duration_s(),
        record.fs(),
        truth.len(),
        peaks.len()
    );

    let frames = frame_rr(&clean, &peaks, 220)?;
    println!("{} frames of {} points", frames.len(), frames.frame_len());
    let first = frames.frames()[0].values();
    let step = first.len() / 11;
    let preview: Vec<String> = first.iter().step_by(step).map(|v| format!("{v:+.3}")).collect();
    println!("frame 0 every {step} points (mV): {}", preview.join(" "));
    Ok(())
}
