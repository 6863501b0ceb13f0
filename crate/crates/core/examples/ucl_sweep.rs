//! Enrol a synthetic cohort, sweep the quality-gate UCL and report the best
//! operating point.
//!
//! `cargo run --release --example ucl_sweep -- [seed]`

use rrif_auth::authcore::{enroll, AuthParams, EnrollParams, ReferenceDb};
use rrif_auth::cohort::{generate_cohort, CohortSpec, Role};
use rrif_auth::evalx::{LabeledRecord, PreparedPool, DEFAULT_AUTO_GRID_POINTS, DEFAULT_TRIALS};

fn main() -> rrif_auth::Result<()> {
    let seed: u64 = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(2024);
    let fs = 360.0;
    let cohort = generate_cohort(&CohortSpec::new(10, 2, seed))?;

    let mut db = ReferenceDb::default();
    let mut pool = Vec::new();
    for m in &cohort {
        // Session 1 is a later recording, split into 15 s probes.
        let probes = m.record(60.0, fs, 1)?.split(15.0);
        match m.role {
            Role::Enrolled => {
                enroll(&mut db, &m.id, &m.record(50.0, fs, 0)?, &EnrollParams::default())?;
                pool.extend(probes.into_iter().map(|r| LabeledRecord::enrolled(r, &m.id)));
            }
            Role::Unknown => pool.extend(probes.into_iter().map(LabeledRecord::unknown)),
        }
    }
    for e in db.entries() {
        println!("{}  mean={:.6}  ucl={:.6}", e.entity_id, e.stats.mean, e.stats.ucl);
    }

    let prepared = PreparedPool::new(&db, &pool, &AuthParams::default())?;
    let grid = prepared.auto_grid(&db, DEFAULT_AUTO_GRID_POINTS)?;
    let sweep = prepared.sweep(&grid, DEFAULT_TRIALS, seed)?;
    print!("{}", sweep.to_csv());
    let best = sweep.best();
    println!(
        "best: ucl={:.6} phi={} N={} accuracy={:.4} op={:.4}",
        best.ucl, best.phi, best.n, best.accuracy, best.op
    );
    print!("{}", best.matrix.to_table());
    Ok(())
}
