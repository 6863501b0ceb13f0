//! ECG traces: CSV import/export, synthetic generation and baseline removal.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// A sampled single-lead ECG trace in millivolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EcgRecord {
    subject_id: String,
    fs: f64,
    samples: Vec<f64>,
}

impl EcgRecord {
    pub fn new(subject_id: impl Into<String>, fs: f64, samples: Vec<f64>) -> Result<Self> {
        if !(fs.is_finite() && fs > 0.0) {
            return Err(Error::InvalidRecord(format!(
                "sampling frequency must be positive, got {fs}"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::InvalidRecord(format!(
                "at least 2 samples required, got {}",
                samples.len()
            )));
        }
        if let Some(i) = samples.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord(format!("sample {i} is not finite")));
        }
        Ok(EcgRecord {
            subject_id: subject_id.into(),
            fs,
            samples,
        })
    }

    pub fn subject_id(&self) -> &str {
        &self.subject_id
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / self.fs
    }

    pub fn with_subject_id(mut self, subject_id: impl Into<String>) -> Self {
        self.subject_id = subject_id.into();
        self
    }

    /// The first `seconds` of the record, or the whole record if it is shorter.
    pub fn head(&self, seconds: f64) -> EcgRecord {
        let n = self.window_len(seconds);
        EcgRecord {
            subject_id: self.subject_id.clone(),
            fs: self.fs,
            samples: self.samples[..n].to_vec(),
        }
    }

    /// The last `seconds` of the record, or the whole record if it is shorter.
    pub fn tail(&self, seconds: f64) -> EcgRecord {
        let n = self.window_len(seconds);
        EcgRecord {
            subject_id: self.subject_id.clone(),
            fs: self.fs,
            samples: self.samples[self.samples.len() - n..].to_vec(),
        }
    }

    /// Consecutive non-overlapping windows of `seconds`, dropping the remainder.
    pub fn split(&self, seconds: f64) -> Vec<EcgRecord> {
        let n = self.window_len(seconds);
        self.samples
            .chunks_exact(n.max(1))
            .map(|c| EcgRecord {
                subject_id: self.subject_id.clone(),
                fs: self.fs,
                samples: c.to_vec(),
            })
            .collect()
    }

    fn window_len(&self, seconds: f64) -> usize {
        let n = (seconds * self.fs).round();
        if n.is_nan() || n < 2.0 {
            2.min(self.samples.len())
        } else {
            (n as usize).min(self.samples.len())
        }
    }

    pub(crate) fn map_samples(&self, samples: Vec<f64>) -> EcgRecord {
        debug_assert_eq!(samples.len(), self.samples.len());
        EcgRecord {
            subject_id: self.subject_id.clone(),
            fs: self.fs,
            samples,
        }
    }
}

/// Parses the ECG CSV text format.
///
/// The first line is `fs=<Hz>`. Every following line holds either a single
/// amplitude in mV or a `t,mv` pair with `t` in seconds on a uniform grid.
pub fn parse_csv(text: &str, subject_id: &str) -> Result<EcgRecord> {
    let mut lines = text.lines().enumerate();
    let fs = match lines.next() {
        Some((_, header)) => {
            let header = header.trim();
            let value = header.strip_prefix("fs=").ok_or_else(|| Error::Parse {
                line: 1,
                msg: format!("expected `fs=<Hz>` header, found `{header}`"),
            })?;
            let fs: f64 = value.trim().parse().map_err(|_| Error::Parse {
                line: 1,
                msg: format!("invalid sampling frequency `{value}`"),
            })?;
            if !(fs.is_finite() && fs > 0.0) {
                return Err(Error::Parse {
                    line: 1,
                    msg: format!("sampling frequency must be positive, got {fs}"),
                });
            }
            fs
        }
        None => {
            return Err(Error::Parse {
                line: 1,
                msg: "missing `fs=<Hz>` header".into(),
            })
        }
    };

    let parse_num = |tok: &str, line: usize| -> Result<f64> {
        let tok = tok.trim();
        match tok.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(Error::Parse {
                line,
                msg: format!("invalid number `{tok}`"),
            }),
        }
    };

    let mut samples = Vec::new();
    let mut times: Vec<(usize, f64)> = Vec::new();
    let mut paired: Option<bool> = None;
    for (idx, raw) in lines {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let is_pair = match fields.len() {
            1 => false,
            2 => true,
            n => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("expected 1 or 2 fields, found {n}"),
                })
            }
        };
        match paired {
            None => paired = Some(is_pair),
            Some(p) if p != is_pair => {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "mixed single-value and `t,mv` lines".into(),
                })
            }
            _ => {}
        }
        if is_pair {
            times.push((line_no, parse_num(fields[0], line_no)?));
            samples.push(parse_num(fields[1], line_no)?);
        } else {
            samples.push(parse_num(fields[0], line_no)?);
        }
    }

    if times.len() >= 2 {
        let step = times[1].1 - times[0].1;
        if step <= 0.0 {
            return Err(Error::Parse {
                line: times[1].0,
                msg: "time column must be increasing".into(),
            });
        }
        for w in times.windows(2) {
            let dt = w[1].1 - w[0].1;
            if ((dt - step) / step).abs() > 1e-6 {
                return Err(Error::Parse {
                    line: w[1].0,
                    msg: format!("non-uniform time step {dt} (expected {step})"),
                });
            }
        }
    }

    EcgRecord::new(subject_id, fs, samples)
}

/// Loads a record; the subject id is taken from the file stem.
pub fn load_csv(path: impl AsRef<Path>) -> Result<EcgRecord> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let id = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    parse_csv(&text, &id)
}

/// Renders the single-column CSV form. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn to_csv_string(record: &EcgRecord) -> String {
    let mut out = String::with_capacity(record.len() * 12 + 16);
    let _ = writeln!(out, "fs={}", record.fs);
    for v in &record.samples {
        let _ = writeln!(out, "{v}");
    }
    out
}

pub fn save_csv(record: &EcgRecord, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_csv_string(record)).map_err(|e| Error::io(path, e))
}

/// One Gaussian wave of the beat template, expressed as fractions of the RR interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    pub phase: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl Wave {
    pub const fn new(phase: f64, width: f64, amplitude: f64) -> Self {
        Wave {
            phase,
            width,
            amplitude,
        }
    }
}

/// Index of the R wave in [`SubjectProfile::waves`].
pub const R_WAVE: usize = 2;

/// Generator parameters for one synthetic subject.
///
/// `waves` holds P, Q, R, S, T in that order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub heart_rate_bpm: f64,
    pub rr_jitter: f64,
    pub waves: [Wave; 5],
    pub noise_sd: f64,
    pub seed: u64,
}

impl SubjectProfile {
    /// A textbook lead-II beat at the given heart rate.
    pub fn typical(heart_rate_bpm: f64, seed: u64) -> Self {
        SubjectProfile {
            heart_rate_bpm,
            rr_jitter: 0.0,
            waves: [
                Wave::new(0.15, 0.025, 0.15),
                Wave::new(0.32, 0.010, -0.12),
                Wave::new(0.35, 0.010, 1.0),
                Wave::new(0.38, 0.010, -0.25),
                Wave::new(0.65, 0.050, 0.30),
            ],
            noise_sd: 0.0,
            seed,
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        SubjectProfile {
            seed,
            ..self.clone()
        }
    }

    pub fn rr_mean_s(&self) -> f64 {
        60.0 / self.heart_rate_bpm
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidProfile(msg));
        if !(30.0..=240.0).contains(&self.heart_rate_bpm) {
            return bad(format!(
                "heart rate {} bpm outside [30, 240]",
                self.heart_rate_bpm
            ));
        }
        if !(0.0..0.5).contains(&self.rr_jitter) {
            return bad(format!("rr_jitter {} outside [0, 0.5)", self.rr_jitter));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad(format!("noise_sd {} must be >= 0", self.noise_sd));
        }
        for (name, w) in ["P", "Q", "R", "S", "T"].iter().zip(&self.waves) {
            if !(0.0..1.0).contains(&w.phase) {
                return bad(format!("{name} phase {} outside [0, 1)", w.phase));
            }
            if !(w.width.is_finite() && w.width > 0.0) {
                return bad(format!("{name} width {} must be > 0", w.width));
            }
            if !w.amplitude.is_finite() {
                return bad(format!("{name} amplitude is not finite"));
            }
        }
        if self.waves[R_WAVE].amplitude <= 0.0 {
            return bad("R amplitude must be > 0".into());
        }
        Ok(())
    }
}

/// Gaussian tails beyond this many widths are below 1e-21 of the amplitude.
const TAIL_WIDTHS: f64 = 10.0;

/// Generates a sum-of-Gaussians ECG and the ground-truth R-peak indices.
///
/// Beat `i` lasts `RR_i = (60 / hr) * (1 + jitter * g_i)` with `g_i` standard
/// normal clipped to ±3. Each wave is centred at `phase * RR_i` from the beat
/// start with standard deviation `width * RR_i`. Two beats are generated
/// before `t = 0` so the start of the trace carries the previous beat's tail.
pub fn synth_ecg(
    profile: &SubjectProfile,
    duration_s: f64,
    fs: f64,
) -> Result<(EcgRecord, Vec<usize>)> {
    profile.validate()?;
    if !(fs.is_finite() && fs >= 100.0) {
        return Err(Error::param("fs", format!("must be >= 100 Hz, got {fs}")));
    }
    if !(duration_s.is_finite() && duration_s >= 2.0 * profile.rr_mean_s()) {
        return Err(Error::param(
            "duration_s",
            format!(
                "{duration_s} s is shorter than 2 beats at {} bpm",
                profile.heart_rate_bpm
            ),
        ));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    let rr_mean = profile.rr_mean_s();
    let next_rr = |rng: &mut ChaCha8Rng| {
        let g: f64 = StandardNormal.sample(rng);
        rr_mean * (1.0 + profile.rr_jitter * g.clamp(-3.0, 3.0))
    };

    // (start, rr) for every beat that can touch [0, duration].
    let mut beats = Vec::new();
    let pre1 = next_rr(&mut rng);
    let pre2 = next_rr(&mut rng);
    beats.push((-pre1 - pre2, pre2));
    beats.push((-pre1, pre1));
    let mut start = 0.0;
    while start <= duration_s + rr_mean {
        let rr = next_rr(&mut rng);
        beats.push((start, rr));
        start += rr;
    }

    let n = (duration_s * fs).round() as usize;
    let mut samples = vec![0.0; n];
    let mut peaks = Vec::new();
    for &(start, rr) in &beats {
        for (k, w) in profile.waves.iter().enumerate() {
            let centre = start + w.phase * rr;
            let sd = w.width * rr;
            let lo = ((centre - TAIL_WIDTHS * sd) * fs).ceil().max(0.0) as usize;
            let hi = ((centre + TAIL_WIDTHS * sd) * fs).floor();
            if hi < 0.0 {
                continue;
            }
            let hi = (hi as usize).min(n.saturating_sub(1));
            for (i, s) in samples.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let z = (i as f64 / fs - centre) / sd;
                *s += w.amplitude * (-0.5 * z * z).exp();
            }
            if k == R_WAVE && centre >= 0.0 {
                let idx = (centre * fs).round() as usize;
                if idx < n {
                    peaks.push(idx);
                }
            }
        }
    }

    if profile.noise_sd > 0.0 {
        let noise = Normal::new(0.0, profile.noise_sd)
            .map_err(|e| Error::InvalidProfile(e.to_string()))?;
        for s in samples.iter_mut() {
            *s += noise.sample(&mut rng);
        }
    }
    let record = EcgRecord::new(format!("synth-{}", profile.seed), fs, samples)?;
    Ok((record, peaks))
}

/// Subtracts a moving-median baseline.
///
/// The window spans `round(baseline_window_s * fs)` samples centred on each
/// sample and shrinks at the record edges.
pub fn preprocess(record: &EcgRecord, baseline_window_s: f64) -> Result<EcgRecord> {
    let w = (baseline_window_s * record.fs()).round();
    if !(w >= 3.0) {
        return Err(Error::param(
            "baseline_window_s",
            format!("window of {w} samples is below 3"),
        ));
    }
    let w = w as usize;
    let n = record.len();
    if w > n {
        return Err(Error::param(
            "baseline_window_s",
            format!("window of {w} samples exceeds the record length {n}"),
        ));
    }
    let half = w / 2;
    let x = record.samples();
    let mut buf = Vec::with_capacity(2 * half + 1);
    let out = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            buf.clear();
            buf.extend_from_slice(&x[lo..hi]);
            x[i] - median_in_place(&mut buf)
        })
        .collect();
    Ok(record.map_samples(out))
}

pub const DEFAULT_BASELINE_WINDOW_S: f64 = 0.6;

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let mid = n / 2;
    let (lower, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    let m = *m;
    if n % 2 == 1 {
        m
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (below + m)
    }
}
