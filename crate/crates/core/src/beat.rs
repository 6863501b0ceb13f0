//! R-peak detection and RR-interval framing.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::signal::EcgRecord;
use crate::{Error, Result};

/// Strictly increasing R-peak sample indices into one record.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PeakList {
    indices: Vec<usize>,
}

impl PeakList {
    /// Validates ordering and bounds against a record of `record_len` samples.
    pub fn new(indices: Vec<usize>, record_len: usize) -> Result<Self> {
        if let Some(w) = indices.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "peaks",
                format!("indices must be strictly increasing ({} then {})", w[0], w[1]),
            ));
        }
        if let Some(&last) = indices.last() {
            if last >= record_len {
                return Err(Error::param(
                    "peaks",
                    format!("index {last} out of bounds for record of {record_len} samples"),
                ));
            }
        }
        Ok(PeakList { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectParams {
    /// Minimum spacing between accepted peaks, seconds.
    pub refractory_s: f64,
    /// Fraction of the local (±1 s) energy maximum a candidate must exceed.
    pub thresh_frac: f64,
}

impl Default for DetectParams {
    fn default() -> Self {
        DetectParams {
            refractory_s: 0.25,
            thresh_frac: 0.4,
        }
    }
}

const ENERGY_WINDOW_S: f64 = 0.150;
const ROLLING_MAX_HALF_S: f64 = 1.0;
const REFINE_HALF_S: f64 = 0.050;

/// Energy-envelope R-peak detector.
///
/// First difference, squared, smoothed with a 150 ms moving average. Runs of
/// samples whose envelope exceeds `thresh_frac` of the rolling 2 s maximum
/// yield one candidate each (their envelope maximum). Candidates closer than
/// the refractory period keep the stronger one; survivors are moved to the
/// raw-signal maximum within ±50 ms.
pub fn detect_rpeaks(record: &EcgRecord, params: DetectParams) -> Result<PeakList> {
    let fs = record.fs();
    if record.duration_s() < 1.0 {
        return Err(Error::NotEnoughData(format!(
            "peak detection needs at least 1 s, record is {:.3} s",
            record.duration_s()
        )));
    }
    let win = (ENERGY_WINDOW_S * fs).round() as usize;
    if win < 3 {
        return Err(Error::param(
            "fs",
            format!("{fs} Hz gives a {win}-sample energy window (< 3)"),
        ));
    }
    if !(params.thresh_frac > 0.0 && params.thresh_frac < 1.0) {
        return Err(Error::param("thresh_frac", "must lie in (0, 1)"));
    }
    if !(params.refractory_s.is_finite() && params.refractory_s >= 0.0) {
        return Err(Error::param("refractory_s", "must be >= 0"));
    }

    let x = record.samples();
    let n = x.len();
    let mut sq = vec![0.0; n];
    for i in 1..n {
        let d = x[i] - x[i - 1];
        sq[i] = d * d;
    }
    let energy = centred_mean(&sq, win / 2);
    let roll = centred_max(&energy, (ROLLING_MAX_HALF_S * fs).round() as usize);

    // Each supra-threshold run yields one candidate at its midpoint; the
    // smoothed energy is flat across a QRS, so its argmax is noise-driven.
    let mut candidates: Vec<(usize, f64)> = Vec::new();
    let mut run: Option<(usize, f64)> = None;
    for i in 0..=n {
        let hit = i < n && energy[i] > 0.0 && energy[i] > params.thresh_frac * roll[i];
        match (hit, run) {
            (true, None) => run = Some((i, energy[i])),
            (true, Some((start, peak))) => run = Some((start, peak.max(energy[i]))),
            (false, Some((start, peak))) => {
                candidates.push(((start + i - 1) / 2, peak));
                run = None;
            }
            (false, None) => {}
        }
    }

    let min_gap = params.refractory_s * fs;
    let far_enough = |a: usize, b: usize| (b - a) as f64 >= min_gap;

    let mut kept: Vec<(usize, f64)> = Vec::with_capacity(candidates.len());
    for c in candidates {
        match kept.last_mut() {
            Some(last) if !far_enough(last.0, c.0) => {
                if c.1 > last.1 {
                    *last = c;
                }
            }
            _ => kept.push(c),
        }
    }

    let half = (REFINE_HALF_S * fs).round() as usize;
    let mut out: Vec<usize> = Vec::with_capacity(kept.len());
    for (p, _) in kept {
        let lo = p.saturating_sub(half);
        let hi = (p + half).min(n - 1);
        let mut best = lo;
        for i in lo..=hi {
            if x[i] > x[best] {
                best = i;
            }
        }
        // Refinement can pull two peaks together again.
        match out.last_mut() {
            Some(last) if best <= *last || !far_enough(*last, best) => {
                if x[best] > x[*last] {
                    *last = best;
                }
            }
            _ => out.push(best),
        }
    }
    // A replacement may have landed too close to its predecessor.
    let mut i = 1;
    while i < out.len() {
        if out[i] <= out[i - 1] || !far_enough(out[i - 1], out[i]) {
            let drop = if x[out[i]] > x[out[i - 1]] { i - 1 } else { i };
            out.remove(drop);
            i = i.saturating_sub(1).max(1);
        } else {
            i += 1;
        }
    }

    PeakList::new(out, n)
}

fn centred_mean(v: &[f64], half: usize) -> Vec<f64> {
    let n = v.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    let mut acc = 0.0;
    for &e in v {
        acc += e;
        prefix.push(acc);
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            ((prefix[hi] - prefix[lo]) / (hi - lo) as f64).max(0.0)
        })
        .collect()
}

fn centred_max(v: &[f64], half: usize) -> Vec<f64> {
    let n = v.len();
    let mut out = Vec::with_capacity(n);
    let mut dq: VecDeque<usize> = VecDeque::new();
    let mut next = 0;
    for i in 0..n {
        let hi = (i + half).min(n - 1);
        while next <= hi {
            while dq.back().is_some_and(|&b| v[b] <= v[next]) {
                dq.pop_back();
            }
            dq.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(half);
        while dq.front().is_some_and(|&f| f < lo) {
            dq.pop_front();
        }
        out.push(v[*dq.front().expect("window is never empty")]);
    }
    out
}

/// One RR interval resampled to a fixed number of points.
#[derive(Debug, Clone, PartialEq)]
pub struct RrFrame {
    values: Vec<f64>,
    span: (usize, usize),
}

impl RrFrame {
    /// Wraps pre-computed values (e.g. constructed test frames).
    pub fn from_values(values: Vec<f64>, span: (usize, usize)) -> Result<Self> {
        if values.len() < 2 {
            return Err(Error::param("frame_len", "frames need at least 2 values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidRecord("frame contains non-finite values".into()));
        }
        Ok(RrFrame { values, span })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Source indices `(start, end)`, both inclusive.
    pub fn span(&self) -> (usize, usize) {
        self.span
    }
}

/// All frames cut from one entity's record.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSet {
    entity_id: String,
    frames: Vec<RrFrame>,
    frame_len: usize,
}

impl FrameSet {
    pub fn new(entity_id: impl Into<String>, frame_len: usize, frames: Vec<RrFrame>) -> Result<Self> {
        if frame_len < 2 {
            return Err(Error::param("frame_len", "must be >= 2"));
        }
        if let Some(f) = frames.iter().find(|f| f.len() != frame_len) {
            return Err(Error::LengthMismatch {
                expected: frame_len,
                got: f.len(),
            });
        }
        Ok(FrameSet {
            entity_id: entity_id.into(),
            frames,
            frame_len,
        })
    }

    pub fn entity_id(&self) -> &str {
        &self.entity_id
    }

    pub fn frames(&self) -> &[RrFrame] {
        &self.frames
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// One CSV row per frame, `frame_len` columns, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for f in &self.frames {
            for (j, v) in f.values.iter().enumerate() {
                if j > 0 {
                    out.push(',');
                }
                let _ = write!(out, "{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Cuts the record at consecutive peaks and linearly resamples every
/// interval `[p_i, p_{i+1}]` (both ends included) onto `frame_len` points.
pub fn frame_rr(record: &EcgRecord, peaks: &PeakList, frame_len: usize) -> Result<FrameSet> {
    if frame_len < 2 {
        return Err(Error::param("frame_len", format!("must be >= 2, got {frame_len}")));
    }
    let x = record.samples();
    if let Some(&last) = peaks.indices().last() {
        if last >= x.len() {
            return Err(Error::param(
                "peaks",
                format!("index {last} out of bounds for record of {} samples", x.len()),
            ));
        }
    }
    let frames = peaks
        .indices()
        .windows(2)
        .map(|w| RrFrame {
            values: resample_segment(&x[w[0]..=w[1]], frame_len),
            span: (w[0], w[1]),
        })
        .collect();
    FrameSet::new(record.subject_id(), frame_len, frames)
}

/// Endpoint-inclusive linear resampling of `seg` onto `len` points.
pub fn resample_segment(seg: &[f64], len: usize) -> Vec<f64> {
    debug_assert!(seg.len() >= 2 && len >= 2);
    let last = seg.len() - 1;
    let step = last as f64 / (len - 1) as f64;
    (0..len)
        .map(|j| {
            if j == 0 {
                return seg[0];
            }
            if j == len - 1 {
                return seg[last];
            }
            let pos = j as f64 * step;
            let i0 = (pos.floor() as usize).min(last - 1);
            let frac = pos - i0 as f64;
            seg[i0] * (1.0 - frac) + seg[i0 + 1] * frac
        })
        .collect()
}
