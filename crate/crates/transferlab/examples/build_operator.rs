//! Discretize a random system's transfer operator on a uniform grid and look
//! at the resulting row-stochastic matrix.
//!
//!     cargo run --example build_operator

use transferlab::gallery::gallery_entry;
use transferlab::io::matrix_to_string;
use transferlab::ulam::{build_ulam, Partition};

fn main() -> transferlab::Result<()> {
    let entry = gallery_entry("bernoulli_convolution")?;
    println!("system: {} — {}", entry.id, entry.notes);

    let n = 8;
    let k = build_ulam(&entry.system, Partition::new(n)?, 8)?;
    println!(
        "built a {}x{} matrix with {} nonzeros via {} (max row defect {:.1e})",
        k.n,
        k.n,
        k.nnz(),
        k.build_method,
        k.max_row_defect()
    );

    // Each row i holds the mass cell i spreads over the grid in one step.
    for (i, row) in k.rows.iter().enumerate() {
        let cells: Vec<String> =
            row.iter().map(|(j, v)| format!("{j}:{v:.3}")).collect();
        println!("row {i}: {}", cells.join("  "));
    }

    // The text format round-trips bit-exactly; this is what
    // `transferlab operator` writes.
    let text = matrix_to_string(&k);
    println!("\nserialized header: {}", text.lines().next().unwrap());
    Ok(())
}
