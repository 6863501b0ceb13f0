//! Save a reference database to JSON, load it back and check that the
//! reloaded reference functions predict exactly what the originals did.
//!
//! `cargo run --release --example persist_db`

use rrif_auth::authcore::{enroll, load_db, save_db, EnrollParams, ReferenceDb};
use rrif_auth::cohort::{generate_cohort, CohortSpec};

fn main() -> rrif_auth::Result<()> {
    let mut db = ReferenceDb::default();
    for m in generate_cohort(&CohortSpec::new(2, 0, 3))? {
        enroll(&mut db, &m.id, &m.record(50.0, 360.0, 0)?, &EnrollParams::default())?;
    }
    let path = std::env::temp_dir().join("rrif-example-db.json");
    save_db(&db, &path)?;
    let back = load_db(&path)?;

    let frame = vec![0.0; db.frame_len()];
    let mut worst: f64 = 0.0;
    for (a, b) in db.entries().zip(back.entries()) {
        for (p, q) in a.model.predict_frame(&frame)?.iter().zip(b.model.predict_frame(&frame)?) {
            worst = worst.max((p - q).abs());
        }
    }
    let bytes = std::fs::read(&path).map_err(|e| rrif_auth::Error::Io { path: path.clone(), source: e })?;
    println!("{} entities, {} bytes at {}", back.len(), bytes.len(), path.display());
    println!("largest prediction difference after reload: {worst:e}");
    println!("re-serialisation identical: {}", back.to_json().as_bytes() == bytes.as_slice());
    Ok(())
}
