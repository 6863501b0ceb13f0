//! Enrollment, MSE quality gating and known/unknown decisions.
//!
//! Every enrolled entity owns a reference function (a regression tree over
//! frame positions) and the MSE statistics of its own training frames. The
//! upper control limit of those statistics, `μ + 3σ`, is the entity's
//! identification threshold.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::beat::{detect_rpeaks, frame_rr, DetectParams, FrameSet, RrFrame};
use crate::learners::{predict_dt, train_dt, DtModel, DtParams, FeatureMap};
use crate::signal::{preprocess, EcgRecord, DEFAULT_BASELINE_WINDOW_S};
use crate::{Error, Result, DEFAULT_FRAME_LEN};

pub const DB_FORMAT_VERSION: &str = "1";

/// `mean + 3 * sample standard deviation`.
pub fn compute_ucl(mses: &[f64]) -> Result<f64> {
    let (mean, std) = mean_std(mses)?;
    Ok(mean + 3.0 * std)
}

fn mean_std(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "control limits need at least 2 values, got {}",
            values.len()
        )));
    }
    if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::param("mses", "values must be finite and >= 0"));
    }
    if values.iter().all(|v| *v == values[0]) {
        return Ok((values[0], 0.0));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QualityStats {
    pub mses: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub ucl: f64,
}

impl QualityStats {
    pub fn from_mses(mses: Vec<f64>) -> Result<Self> {
        let (mean, std) = mean_std(&mses)?;
        Ok(QualityStats {
            mses,
            mean,
            std,
            ucl: mean + 3.0 * std,
        })
    }
}

/// A reference function: feature mapping plus the tree trained on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceModel {
    pub frame_len: usize,
    pub features: FeatureMap,
    pub tree: DtModel,
}

impl ReferenceModel {
    /// Predicted amplitude at every position of `frame`.
    pub fn predict_frame(&self, frame: &[f64]) -> Result<Vec<f64>> {
        if frame.len() != self.frame_len {
            return Err(Error::LengthMismatch {
                expected: self.frame_len,
                got: frame.len(),
            });
        }
        (0..self.frame_len)
            .map(|j| predict_dt(&self.tree, &self.features.features(frame, j)))
            .collect()
    }
}

/// `(1/L) Σ_j (frame[j] - f(j))²`.
pub fn frame_mse(frame: &RrFrame, model: &ReferenceModel) -> Result<f64> {
    let pred = model.predict_frame(frame.values())?;
    let sum: f64 = frame
        .values()
        .iter()
        .zip(&pred)
        .map(|(v, p)| (v - p) * (v - p))
        .sum();
    Ok(sum / frame.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceEntry {
    pub entity_id: String,
    pub model: ReferenceModel,
    pub stats: QualityStats,
    /// Unix seconds.
    pub enrolled_at: u64,
    pub frame_len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceDb {
    version: String,
    frame_len: usize,
    entities: BTreeMap<String, ReferenceEntry>,
}

impl Default for ReferenceDb {
    fn default() -> Self {
        ReferenceDb::new(DEFAULT_FRAME_LEN)
    }
}

impl ReferenceDb {
    pub fn new(frame_len: usize) -> Self {
        ReferenceDb {
            version: DB_FORMAT_VERSION.to_string(),
            frame_len,
            entities: BTreeMap::new(),
        }
    }

    pub fn frame_len(&self) -> usize {
        self.frame_len
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&ReferenceEntry> {
        self.entities.get(id)
    }

    /// Entries in lexicographic id order.
    pub fn entries(&self) -> impl Iterator<Item = &ReferenceEntry> {
        self.entities.values()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.entities.keys().map(String::as_str)
    }

    /// Median of the per-entity training UCLs.
    pub fn median_ucl(&self) -> Option<f64> {
        let mut u: Vec<f64> = self.entries().map(|e| e.stats.ucl).collect();
        if u.is_empty() {
            return None;
        }
        u.sort_by(f64::total_cmp);
        let m = u.len() / 2;
        Some(if u.len() % 2 == 1 { u[m] } else { 0.5 * (u[m - 1] + u[m]) })
    }

    pub fn max_ucl(&self) -> Option<f64> {
        self.entries().map(|e| e.stats.ucl).reduce(f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("database serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::CorruptDb(e.to_string()))?;
        let found = match value.get("version") {
            Some(serde_json::Value::String(s)) => s.clone(),
            Some(other) => other.to_string(),
            None => return Err(Error::CorruptDb("missing `version` field".into())),
        };
        if found != DB_FORMAT_VERSION {
            return Err(Error::VersionMismatch {
                found,
                expected: DB_FORMAT_VERSION.into(),
            });
        }
        let db: ReferenceDb =
            serde_json::from_value(value).map_err(|e| Error::CorruptDb(e.to_string()))?;
        db.validate()?;
        Ok(db)
    }

    fn validate(&self) -> Result<()> {
        for (id, e) in &self.entities {
            if id != &e.entity_id || id.is_empty() {
                return Err(Error::CorruptDb(format!("entry key `{id}` does not match its id")));
            }
            if e.frame_len != self.frame_len || e.model.frame_len != self.frame_len {
                return Err(Error::CorruptDb(format!(
                    "entity `{id}` has frame length {} (database uses {})",
                    e.frame_len, self.frame_len
                )));
            }
            e.model.tree.validate()?;
            e.model.features.validate(self.frame_len)?;
            if e.model.tree.n_features() != e.model.features.dim() {
                return Err(Error::CorruptDb(format!(
                    "entity `{id}` tree expects {} features, mapping yields {}",
                    e.model.tree.n_features(),
                    e.model.features.dim()
                )));
            }
            if !(e.stats.ucl.is_finite() && e.stats.mean.is_finite() && e.stats.std >= 0.0) {
                return Err(Error::CorruptDb(format!("entity `{id}` has invalid statistics")));
            }
        }
        Ok(())
    }
}

pub fn save_db(db: &ReferenceDb, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, db.to_json()).map_err(|e| Error::io(path, e))
}

pub fn load_db(path: impl AsRef<Path>) -> Result<ReferenceDb> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ReferenceDb::from_json(&text)
}

/// Settings for turning a raw record into frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameParams {
    pub baseline_window_s: f64,
    pub detect: DetectParams,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            baseline_window_s: DEFAULT_BASELINE_WINDOW_S,
            detect: DetectParams::default(),
        }
    }
}

/// Baseline removal, R-peak detection and RR framing in one step.
pub fn extract_frames(record: &EcgRecord, frame_len: usize, params: &FrameParams) -> Result<FrameSet> {
    let clean = preprocess(record, params.baseline_window_s)?;
    let peaks = detect_rpeaks(&clean, params.detect)?;
    frame_rr(&clean, &peaks, frame_len)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnrollParams {
    pub train_window_s: f64,
    /// Accept records shorter than the training window.
    pub allow_short: bool,
    pub frames: FrameParams,
    pub tree: DtParams,
    pub features: FeatureMap,
    pub enrolled_at: u64,
}

impl Default for EnrollParams {
    fn default() -> Self {
        EnrollParams {
            train_window_s: 50.0,
            allow_short: false,
            frames: FrameParams::default(),
            tree: DtParams::default(),
            features: FeatureMap::Position,
            enrolled_at: 0,
        }
    }
}

/// Trains a reference function on the first `train_window_s` of `record`
/// and stores it with its quality statistics.
pub fn enroll<'a>(
    db: &'a mut ReferenceDb,
    entity_id: &str,
    record: &EcgRecord,
    params: &EnrollParams,
) -> Result<&'a ReferenceEntry> {
    if entity_id.is_empty() {
        return Err(Error::param("entity_id", "must not be empty"));
    }
    if db.entities.contains_key(entity_id) {
        return Err(Error::DuplicateEntity(entity_id.to_string()));
    }
    // One sample of slack for windows that are not a whole number of samples.
    if record.duration_s() + 1.0 / record.fs() < params.train_window_s && !params.allow_short {
        return Err(Error::NotEnoughData(format!(
            "record `{}` lasts {:.2} s, training window is {} s",
            record.subject_id(),
            record.duration_s(),
            params.train_window_s
        )));
    }
    params.features.validate(db.frame_len)?;
    let window = record.head(params.train_window_s);
    let frames = extract_frames(&window, db.frame_len, &params.frames)?;
    if frames.len() < 2 {
        return Err(Error::NotEnoughData(format!(
            "`{entity_id}` yielded {} frames ({} peaks); at least 2 frames are needed",
            frames.len(),
            frames.len() + usize::from(!frames.is_empty()),
        )));
    }

    let (x, y) = params.features.training_set(frames.frames());
    let model = ReferenceModel {
        frame_len: db.frame_len,
        features: params.features.clone(),
        tree: train_dt(&x, &y, params.tree)?,
    };
    let mses = frames
        .frames()
        .iter()
        .map(|f| frame_mse(f, &model))
        .collect::<Result<Vec<_>>>()?;
    let entry = ReferenceEntry {
        entity_id: entity_id.to_string(),
        model,
        stats: QualityStats::from_mses(mses)?,
        enrolled_at: params.enrolled_at,
        frame_len: db.frame_len,
    };
    Ok(db.entities.entry(entity_id.to_string()).or_insert(entry))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuthParams {
    pub test_window_s: f64,
    /// Minimum fraction of frames that must pass the quality gate.
    pub apr_min: f64,
    /// Multiplier on the candidate's training UCL for the identification test.
    pub id_margin: f64,
    pub frames: FrameParams,
}

impl Default for AuthParams {
    fn default() -> Self {
        AuthParams {
            test_window_s: 15.0,
            apr_min: 0.5,
            id_margin: 1.0,
            frames: FrameParams::default(),
        }
    }
}

impl AuthParams {
    fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.apr_min) {
            return Err(Error::param("apr_min", format!("must lie in [0, 1], got {}", self.apr_min)));
        }
        if !(self.id_margin.is_finite() && self.id_margin > 0.0) {
            return Err(Error::param("id_margin", format!("must be > 0, got {}", self.id_margin)));
        }
        if !(self.test_window_s > 0.0) {
            return Err(Error::param("test_window_s", "must be > 0"));
        }
        Ok(())
    }
}

/// Per-frame, per-entity MSEs of one probe record, independent of the gate.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeScores {
    entity_ids: Vec<String>,
    ucls: Vec<f64>,
    /// `mse[frame][entity]`
    mse: Vec<Vec<f64>>,
}

impl ProbeScores {
    pub fn frame_count(&self) -> usize {
        self.mse.len()
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn frame_mses(&self) -> &[Vec<f64>] {
        &self.mse
    }

    /// Best-matching entity MSE of every frame.
    pub fn min_mses(&self) -> Vec<f64> {
        self.mse
            .iter()
            .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
            .collect()
    }

    /// Applies the quality gate and the identification rule.
    pub fn decide(&self, gate_ucl: f64, params: &AuthParams) -> Result<AuthDecision> {
        params.validate()?;
        if gate_ucl.is_nan() || gate_ucl < 0.0 {
            return Err(Error::param("gate_ucl", format!("must be >= 0, got {gate_ucl}")));
        }
        let passing: Vec<&Vec<f64>> = self
            .mse
            .iter()
            .filter(|row| row.iter().copied().fold(f64::INFINITY, f64::min) <= gate_ucl)
            .collect();
        let apr = passing.len() as f64 / self.mse.len() as f64;
        if apr < params.apr_min || passing.is_empty() {
            return Ok(AuthDecision {
                outcome: Outcome::Rejected,
                apr,
                scores: Vec::new(),
            });
        }

        let scores: Vec<EntityScore> = self
            .entity_ids
            .iter()
            .enumerate()
            .map(|(e, id)| EntityScore {
                entity_id: id.clone(),
                score: passing.iter().map(|row| row[e]).sum::<f64>() / passing.len() as f64,
            })
            .collect();
        // entity_ids are sorted, so the first strict minimum is the
        // lexicographically smallest among ties.
        let mut best = 0;
        for (e, s) in scores.iter().enumerate().skip(1) {
            if s.score < scores[best].score {
                best = e;
            }
        }
        let score = scores[best].score;
        let outcome = if score <= params.id_margin * self.ucls[best] {
            Outcome::Known {
                entity_id: scores[best].entity_id.clone(),
                score,
            }
        } else {
            Outcome::Unknown { best_score: score }
        };
        Ok(AuthDecision {
            outcome,
            apr,
            scores,
        })
    }
}

/// Frames the first `test_window_s` of `record` and scores every frame
/// against every enrolled entity.
pub fn score_probe(db: &ReferenceDb, record: &EcgRecord, params: &AuthParams) -> Result<ProbeScores> {
    params.validate()?;
    if db.is_empty() {
        return Err(Error::EmptyDb);
    }
    let window = record.head(params.test_window_s);
    let frames = extract_frames(&window, db.frame_len, &params.frames)?;
    if frames.is_empty() {
        return Err(Error::NotEnoughData(format!(
            "probe `{}` produced no frames",
            record.subject_id()
        )));
    }
    let mut mse = Vec::with_capacity(frames.len());
    for f in frames.frames() {
        mse.push(
            db.entries()
                .map(|e| frame_mse(f, &e.model))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    Ok(ProbeScores {
        entity_ids: db.ids().map(str::to_string).collect(),
        ucls: db.entries().map(|e| e.stats.ucl).collect(),
        mse,
    })
}

pub fn authenticate(
    db: &ReferenceDb,
    record: &EcgRecord,
    gate_ucl: f64,
    params: &AuthParams,
) -> Result<AuthDecision> {
    score_probe(db, record, params)?.decide(gate_ucl, params)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Rejected,
    Known { entity_id: String, score: f64 },
    Unknown { best_score: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntityScore {
    pub entity_id: String,
    /// Mean MSE over quality-passing frames, mV².
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthDecision {
    pub outcome: Outcome,
    /// Fraction of frames that passed the quality gate.
    pub apr: f64,
    /// One entry per enrolled entity; empty when rejected.
    pub scores: Vec<EntityScore>,
}

impl AuthDecision {
    pub fn is_rejected(&self) -> bool {
        matches!(self.outcome, Outcome::Rejected)
    }
}

impl fmt::Display for AuthDecision {
    /// `decision=<Known:id|Unknown|Rejected> score=<mV²> apr=<frac>`; rejected
    /// decisions carry no score.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.outcome {
            Outcome::Rejected => write!(f, "decision=Rejected apr={}", self.apr),
            Outcome::Known { entity_id, score } => {
                write!(f, "decision=Known:{entity_id} score={score} apr={}", self.apr)
            }
            Outcome::Unknown { best_score } => {
                write!(f, "decision=Unknown score={best_score} apr={}", self.apr)
            }
        }
    }
}
