//! Randomised authentication trials, confusion matrices and the UCL sweep.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::authcore::{score_probe, AuthDecision, AuthParams, Outcome, ProbeScores, ReferenceDb};
use crate::signal::EcgRecord;
use crate::{Error, Result};

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_AUTO_GRID_POINTS: usize = 40;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Truth {
    Enrolled(String),
    Unknown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRecord {
    pub record: EcgRecord,
    pub truth: Truth,
}

impl LabeledRecord {
    pub fn enrolled(record: EcgRecord, id: impl Into<String>) -> Self {
        LabeledRecord {
            record,
            truth: Truth::Enrolled(id.into()),
        }
    }

    pub fn unknown(record: EcgRecord) -> Self {
        LabeledRecord {
            record,
            truth: Truth::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct ConfusionMatrix {
    /// Predicted known, actually known, right identity.
    pub kk_correct: usize,
    /// Predicted known, actually known, wrong identity.
    pub kk_wrong: usize,
    /// Predicted known, actually unknown.
    pub ku: usize,
    /// Predicted unknown, actually known.
    pub uk: usize,
    pub uu: usize,
    /// Quality-gated out; not part of the matrix.
    pub rejected: usize,
}

impl ConfusionMatrix {
    /// φ
    pub fn accepted(&self) -> usize {
        self.kk_correct + self.kk_wrong + self.ku + self.uk + self.uu
    }

    /// N
    pub fn total(&self) -> usize {
        self.accepted() + self.rejected
    }

    pub fn record(&mut self, truth: &Truth, decision: &AuthDecision) {
        match (&decision.outcome, truth) {
            (Outcome::Rejected, _) => self.rejected += 1,
            (Outcome::Known { entity_id, .. }, Truth::Enrolled(id)) if entity_id == id => {
                self.kk_correct += 1
            }
            (Outcome::Known { .. }, Truth::Enrolled(_)) => self.kk_wrong += 1,
            (Outcome::Known { .. }, Truth::Unknown) => self.ku += 1,
            (Outcome::Unknown { .. }, Truth::Enrolled(_)) => self.uk += 1,
            (Outcome::Unknown { .. }, Truth::Unknown) => self.uu += 1,
        }
    }

    /// Aligned predicted-by-actual table with rejected and φ/N footers.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<26}{:>16}{:>16}", "Predicted \\ Actual", "Known", "Unknown");
        let _ = writeln!(out, "{:<26}{:>16}{:>16}", "Known (correct id)", self.kk_correct, "-");
        let _ = writeln!(out, "{:<26}{:>16}{:>16}", "Known (wrong id)", self.kk_wrong, self.ku);
        let _ = writeln!(out, "{:<26}{:>16}{:>16}", "Unknown", self.uk, self.uu);
        let _ = writeln!(out, "rejected={} accepted={} total={}", self.rejected, self.accepted(), self.total());
        out
    }

    pub fn to_csv(&self) -> String {
        format!(
            "kk_correct,kk_wrong,ku,uk,uu,rejected,accepted,total\n{},{},{},{},{},{},{},{}\n",
            self.kk_correct,
            self.kk_wrong,
            self.ku,
            self.uk,
            self.uu,
            self.rejected,
            self.accepted(),
            self.total()
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accuracy {
    pub value: f64,
    /// Set when nothing was accepted and `value` is the 0 convention.
    pub degenerate: bool,
}

/// `χ = (kk_correct + uu) / φ`.
pub fn accuracy(cm: &ConfusionMatrix) -> Accuracy {
    let phi = cm.accepted();
    if phi == 0 {
        return Accuracy {
            value: 0.0,
            degenerate: true,
        };
    }
    Accuracy {
        value: (cm.kk_correct + cm.uu) as f64 / phi as f64,
        degenerate: false,
    }
}

/// `Π = (φ / N) · χ`.
pub fn overall_performance(phi: usize, n: usize, chi: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::param("N", "must be >= 1"));
    }
    if phi > n {
        return Err(Error::param("phi", format!("accepted count {phi} exceeds total {n}")));
    }
    if !(0.0..=1.0).contains(&chi) {
        return Err(Error::param("chi", format!("accuracy must lie in [0, 1], got {chi}")));
    }
    Ok(phi as f64 / n as f64 * chi)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialOutcome {
    pub index: usize,
    /// Position of the drawn record in the pool.
    pub pool_index: usize,
    pub truth: Truth,
    pub decision: AuthDecision,
}

/// A pool whose probes have been scored against every enrolled entity once,
/// so that trials at different gates only re-apply the decision rule.
#[derive(Debug, Clone)]
pub struct PreparedPool {
    truths: Vec<Truth>,
    scores: Vec<ProbeScores>,
    params: AuthParams,
}

impl PreparedPool {
    pub fn new(db: &ReferenceDb, pool: &[LabeledRecord], params: &AuthParams) -> Result<Self> {
        if pool.is_empty() {
            return Err(Error::param("pool", "must contain at least one record"));
        }
        if db.is_empty() {
            return Err(Error::EmptyDb);
        }
        for item in pool {
            if let Truth::Enrolled(id) = &item.truth {
                if db.get(id).is_none() {
                    return Err(Error::param(
                        "pool",
                        format!("record `{}` is labelled `{id}`, which is not enrolled", item.record.subject_id()),
                    ));
                }
            }
        }
        let scores = pool
            .iter()
            .map(|item| score_probe(db, &item.record, params))
            .collect::<Result<Vec<_>>>()?;
        Ok(PreparedPool {
            truths: pool.iter().map(|p| p.truth.clone()).collect(),
            scores,
            params: *params,
        })
    }

    pub fn len(&self) -> usize {
        self.truths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truths.is_empty()
    }

    pub fn scores(&self) -> &[ProbeScores] {
        &self.scores
    }

    /// Draws `n` records uniformly with replacement and tallies the decisions.
    pub fn run_trials(&self, n: usize, gate_ucl: f64, seed: u64) -> Result<(ConfusionMatrix, Vec<TrialOutcome>)> {
        if n == 0 {
            return Err(Error::param("n", "at least one trial is required"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cm = ConfusionMatrix::default();
        let mut log = Vec::with_capacity(n);
        for index in 0..n {
            let k = rng.random_range(0..self.len());
            let decision = self.scores[k].decide(gate_ucl, &self.params)?;
            cm.record(&self.truths[k], &decision);
            log.push(TrialOutcome {
                index,
                pool_index: k,
                truth: self.truths[k].clone(),
                decision,
            });
        }
        Ok((cm, log))
    }

    /// One point per grid value, all using the same draws.
    pub fn sweep(&self, grid: &[f64], n: usize, seed: u64) -> Result<Sweep> {
        validate_grid(grid)?;
        let mut points = Vec::with_capacity(grid.len());
        for &ucl in grid {
            let (cm, _) = self.run_trials(n, ucl, seed)?;
            let chi = accuracy(&cm).value;
            points.push(SweepPoint {
                ucl,
                phi: cm.accepted(),
                n: cm.total(),
                accuracy: chi,
                op: overall_performance(cm.accepted(), cm.total(), chi)?,
                matrix: cm,
            });
        }
        let mut best = 0;
        for (i, p) in points.iter().enumerate().skip(1) {
            if p.op > points[best].op {
                best = i;
            }
        }
        Ok(Sweep { points, best })
    }

    /// Evenly spaced grid from the smallest per-frame best-entity MSE in the
    /// pool up to three times the largest enrolled UCL.
    pub fn auto_grid(&self, db: &ReferenceDb, steps: usize) -> Result<Vec<f64>> {
        let lo = self
            .scores
            .iter()
            .flat_map(|s| s.min_mses())
            .fold(f64::INFINITY, f64::min);
        let hi = 3.0 * db.max_ucl().ok_or(Error::EmptyDb)?;
        linear_grid(lo.min(hi * 0.5), hi, steps)
    }
}

pub fn run_trials(
    db: &ReferenceDb,
    pool: &[LabeledRecord],
    n: usize,
    gate_ucl: f64,
    seed: u64,
    params: &AuthParams,
) -> Result<(ConfusionMatrix, Vec<TrialOutcome>)> {
    if n == 0 {
        return Err(Error::param("n", "at least one trial is required"));
    }
    PreparedPool::new(db, pool, params)?.run_trials(n, gate_ucl, seed)
}

pub fn sweep_ucl(
    db: &ReferenceDb,
    pool: &[LabeledRecord],
    grid: &[f64],
    n: usize,
    seed: u64,
    params: &AuthParams,
) -> Result<Sweep> {
    validate_grid(grid)?;
    PreparedPool::new(db, pool, params)?.sweep(grid, n, seed)
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::param("grid", "must contain at least one value"));
    }
    if grid.iter().any(|g| g.is_nan() || *g < 0.0) {
        return Err(Error::param("grid", "values must be >= 0"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("grid", "values must be strictly increasing"));
    }
    Ok(())
}

/// `steps` evenly spaced values from `lo` to `hi` inclusive.
pub fn linear_grid(lo: f64, hi: f64, steps: usize) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::param("grid", "steps must be >= 1"));
    }
    if !(lo.is_finite() && hi.is_finite() && lo >= 0.0) {
        return Err(Error::param("grid", format!("bounds must be finite and >= 0, got {lo}:{hi}")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    if hi <= lo {
        return Err(Error::param("grid", format!("upper bound {hi} must exceed lower bound {lo}")));
    }
    let step = (hi - lo) / (steps - 1) as f64;
    let mut g: Vec<f64> = (0..steps).map(|i| lo + step * i as f64).collect();
    g[steps - 1] = hi;
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub ucl: f64,
    pub phi: usize,
    pub n: usize,
    pub accuracy: f64,
    pub op: f64,
    pub matrix: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub points: Vec<SweepPoint>,
    best: usize,
}

impl Sweep {
    /// Highest Π; ties go to the smallest UCL.
    pub fn best(&self) -> &SweepPoint {
        &self.points[self.best]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("ucl,phi,N,accuracy,op\n");
        for p in &self.points {
            let _ = writeln!(out, "{},{},{},{},{}", p.ucl, p.phi, p.n, p.accuracy, p.op);
        }
        out
    }
}
