//! Split the discretized operator into its ergodic components: recurrent
//! supports, stationary densities, periods, and where the transient cells'
//! mass is absorbed.
//!
//!     cargo run --example decompose

use transferlab::gallery::gallery_entry;
use transferlab::spectral::{ergodic_decomposition, DEFAULT_TOL_SPARSE};
use transferlab::ulam::{build_ulam, Partition};

fn main() -> transferlab::Result<()> {
    // Two noisy sinks separated by an expanding middle: two components plus
    // a strip of transient cells in between.
    let entry = gallery_entry("two_sink_additive")?;
    let n = 64;
    let k = build_ulam(&entry.system, Partition::new(n)?, 8)?;
    let d = ergodic_decomposition(&k, DEFAULT_TOL_SPARSE)?;

    println!("system: {} at N={n}", entry.id);
    println!("components: {}", d.components.len());
    for (ci, c) in d.components.iter().enumerate() {
        let lo = *c.support.first().unwrap() as f64 / n as f64;
        let hi = (*c.support.last().unwrap() + 1) as f64 / n as f64;
        println!(
            "  component {ci}: {} cells within [{lo:.3}, {hi:.3}), period {}",
            c.support.len(),
            c.period
        );
    }
    println!("transient cells: {}", d.transient_cells.len());

    // Absorption row for the transient cell nearest the middle of [0,1].
    if let Some(pos) = d.transient_cells.iter().position(|&c| c >= n / 2) {
        let cell = d.transient_cells[pos];
        let probs: Vec<String> = d.absorption[pos]
            .iter()
            .enumerate()
            .map(|(ci, p)| format!("component {ci}: {p:.4}"))
            .collect();
        println!(
            "absorption from cell {cell} (x ~ {:.3}): {}",
            (cell as f64 + 0.5) / n as f64,
            probs.join(", ")
        );
    }
    Ok(())
}
