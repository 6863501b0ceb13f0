//! Enrol a few subjects and authenticate fresh recordings, including one
//! from a subject who never enrolled.
//!
//! `cargo run --release --example enroll_and_auth`

use rrif_auth::authcore::{authenticate, enroll, AuthParams, EnrollParams, ReferenceDb};
use rrif_auth::cohort::{generate_cohort, CohortSpec, Role};

fn main() -> rrif_auth::Result<()> {
    let cohort = generate_cohort(&CohortSpec::new(4, 1, 21))?;
    let mut db = ReferenceDb::default();
    for m in cohort.iter().filter(|m| m.role == Role::Enrolled) {
        let e = enroll(&mut db, &m.id, &m.record(50.0, 360.0, 0)?, &EnrollParams::default())?;
        println!("enrolled {}: {} frames, UCL {:.6} mV²", e.entity_id, e.stats.mses.len(), e.stats.ucl);
    }

    let gate = db.max_ucl().expect("non-empty");
    for m in &cohort {
        let probe = m.record(15.0, 360.0, 1)?;
        let d = authenticate(&db, &probe, gate, &AuthParams::default())?;
        println!("{:>4} ({:?}) -> {d}", m.id, m.role);
    }
    let d = authenticate(&db, &cohort[0].record(15.0, 360.0, 2)?, 0.0, &AuthParams::default())?;
    println!("gate 0 -> {d}");
    Ok(())
}
