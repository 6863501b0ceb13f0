//! Reproducible synthetic subject cohorts.
//!
//! Profiles are drawn around a textbook lead-II beat and rejection-sampled so
//! that every pair of subjects differs by at least a minimum mean squared
//! distance between their noise-free beat templates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::signal::{synth_ecg, EcgRecord, SubjectProfile, Wave};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Enrolled,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohortMember {
    pub id: String,
    pub role: Role,
    pub profile: SubjectProfile,
}

impl CohortMember {
    /// Seed of this member's recording session `session`; session 0 uses the
    /// profile seed itself.
    pub fn session_seed(&self, session: u64) -> u64 {
        self.profile
            .seed
            .wrapping_add(session.wrapping_mul(0x9E37_79B9_7F4A_7C15))
    }

    pub fn record(&self, duration_s: f64, fs: f64, session: u64) -> Result<EcgRecord> {
        let profile = self.profile.with_seed(self.session_seed(session));
        let (rec, _) = synth_ecg(&profile, duration_s, fs)?;
        Ok(rec.with_subject_id(self.id.clone()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CohortSpec {
    pub enrolled: usize,
    pub unknown: usize,
    pub seed: u64,
    /// Minimum template MSE (mV²) between any two members.
    pub min_separation: f64,
}

impl CohortSpec {
    pub fn new(enrolled: usize, unknown: usize, seed: u64) -> Self {
        CohortSpec {
            enrolled,
            unknown,
            seed,
            min_separation: DEFAULT_MIN_SEPARATION,
        }
    }
}

pub const DEFAULT_MIN_SEPARATION: f64 = 0.003;
const TEMPLATE_LEN: usize = 220;
const MAX_DRAWS: usize = 10_000;

pub fn generate_cohort(spec: &CohortSpec) -> Result<Vec<CohortMember>> {
    if spec.enrolled == 0 {
        return Err(Error::param("enrolled", "at least one enrolled subject is required"));
    }
    if !(spec.min_separation.is_finite() && spec.min_separation >= 0.0) {
        return Err(Error::param("min_separation", "must be >= 0"));
    }
    let total = spec.enrolled + spec.unknown;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut members: Vec<CohortMember> = Vec::with_capacity(total);
    let mut templates: Vec<Vec<f64>> = Vec::with_capacity(total);
    let mut draws = 0;
    while members.len() < total {
        draws += 1;
        if draws > MAX_DRAWS {
            return Err(Error::param(
                "min_separation",
                format!("could not place {total} subjects {} mV² apart", spec.min_separation),
            ));
        }
        let profile = random_profile(&mut rng);
        let t = template(&profile, TEMPLATE_LEN);
        if templates.iter().any(|o| mse(o, &t) < spec.min_separation) {
            continue;
        }
        let k = members.len();
        let (id, role) = if k < spec.enrolled {
            (format!("S{:02}", k + 1), Role::Enrolled)
        } else {
            (format!("U{:02}", k - spec.enrolled + 1), Role::Unknown)
        };
        templates.push(t);
        members.push(CohortMember { id, role, profile });
    }
    Ok(members)
}

fn random_profile(rng: &mut ChaCha8Rng) -> SubjectProfile {
    let mut u = |lo: f64, hi: f64| rng.random_range(lo..hi);
    let r_phase = 0.35;
    let waves = [
        Wave::new(u(0.12, 0.20), u(0.018, 0.035), u(0.05, 0.25)),
        Wave::new(r_phase - u(0.020, 0.032), u(0.007, 0.012), -u(0.03, 0.20)),
        Wave::new(r_phase, u(0.008, 0.012), u(0.8, 1.6)),
        Wave::new(r_phase + u(0.018, 0.032), u(0.007, 0.013), -u(0.08, 0.40)),
        Wave::new(u(0.60, 0.72), u(0.035, 0.065), u(0.12, 0.45)),
    ];
    SubjectProfile {
        heart_rate_bpm: u(55.0, 95.0),
        rr_jitter: u(0.02, 0.05),
        waves,
        noise_sd: u(0.01, 0.03),
        seed: rng.random(),
    }
}

/// Noise-free beat from one R-peak to the next on `len` points, including
/// the tails of the neighbouring beats.
pub fn template(profile: &SubjectProfile, len: usize) -> Vec<f64> {
    let r = profile.waves[crate::signal::R_WAVE].phase;
    (0..len)
        .map(|j| {
            let u = r + j as f64 / (len - 1) as f64;
            (-1..=2)
                .map(|k| {
                    profile
                        .waves
                        .iter()
                        .map(|w| {
                            let z = (u - (k as f64 + w.phase)) / w.width;
                            w.amplitude * (-0.5 * z * z).exp()
                        })
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

fn mse(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Cohort description written next to the generated CSV files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub session: u64,
    pub fs: f64,
    pub duration_s: f64,
    pub subjects: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub role: Role,
    pub file: String,
    pub record_seed: u64,
    pub profile: SubjectProfile,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse {
            line: e.line(),
            msg: format!("manifest: {e}"),
        })
    }

    pub fn ids(&self, role: Role) -> impl Iterator<Item = &str> {
        self.subjects
            .iter()
            .filter(move |s| s.role == role)
            .map(|s| s.id.as_str())
    }
}
