//! Rank frame positions by how much they say about who the subject is.
//!
//! `cargo run --release --example rank_features`

use rrif_auth::authcore::{extract_frames, FrameParams};
use rrif_auth::cohort::{generate_cohort, CohortSpec};
use rrif_auth::infotheory::rank_features;

fn main() -> rrif_auth::Result<()> {
    let cohort = generate_cohort(&CohortSpec::new(6, 0, 5))?;
    let mut sets = Vec::new();
    for m in &cohort {
        let rec = m.record(50.0, 360.0, 0)?;
        sets.push(extract_frames(&rec, 220, &FrameParams::default())?);
    }
    let ranking = rank_features(&sets, 16, 10)?;
    println!("top positions by mutual information with the subject label:");
    for e in ranking.entries() {
        println!("  position {:>3}  {:.4} bits", e.position, e.mi_bits);
    }
    Ok(())
}
