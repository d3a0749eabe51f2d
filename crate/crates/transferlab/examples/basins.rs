//! Survey statistical basins: sample initial points, run long noisy orbits,
//! and assign each to the ergodic component its time averages settle on.
//!
//!     cargo run --release --example basins

use transferlab::gallery::gallery_entry;
use transferlab::montecarlo::{
    basin_survey, DEFAULT_BASIN_THRESHOLD, DEFAULT_N_AVG, DEFAULT_N_BURN,
};
use transferlab::spectral::{ergodic_decomposition, DEFAULT_TOL_SPARSE};
use transferlab::ulam::{build_ulam, Partition};

fn main() -> transferlab::Result<()> {
    // Two invariant blocks: a chaotic expanding half and a half contracting
    // onto a thin attractor. Each should capture half of the starts.
    let entry = gallery_entry("direct_sum_expanding_contracting")?;
    let n = 256;
    let part = Partition::new(n)?;
    let k = build_ulam(&entry.system, part, 8)?;
    let decomp = ergodic_decomposition(&k, DEFAULT_TOL_SPARSE)?;
    println!("system: {} ({} components)", entry.id, decomp.components.len());

    let report = basin_survey(
        &entry.system,
        part,
        &decomp,
        500,
        DEFAULT_N_BURN,
        DEFAULT_N_AVG,
        DEFAULT_BASIN_THRESHOLD,
        0,
    )?;
    for (ci, (f, c)) in report.fractions.iter().zip(&report.counts).enumerate() {
        println!("component {ci}: {c} samples ({:.1}%)", f * 100.0);
    }
    println!(
        "unassigned: {} samples ({:.1}%)",
        report.unassigned_count,
        report.unassigned * 100.0
    );
    Ok(())
}
