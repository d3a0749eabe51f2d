//! Cross-check the matrix against direct simulation: the pairing
//! <psi, phi K^n> must match the Monte Carlo average of psi(x_n) phi(x_0)
//! within sampling error.
//!
//!     cargo run --release --example duality

use transferlab::gallery::gallery_entry;
use transferlab::montecarlo::duality_check;
use transferlab::ulam::{build_ulam, Partition};

fn main() -> transferlab::Result<()> {
    let sys = gallery_entry("bernoulli_convolution")?.system;
    let n_grid = 64;
    let part = Partition::new(n_grid)?;
    let k = build_ulam(&sys, part, 8)?;

    let mid = |i: usize| (i as f64 + 0.5) / n_grid as f64;
    let phi: Vec<f64> = (0..n_grid).map(mid).collect();
    let psi: Vec<f64> = (0..n_grid).map(|i| if mid(i) > 0.5 { 1.0 } else { 0.0 }).collect();

    println!("{:>3} {:>14} {:>14} {:>8} {:>6}", "n", "matrix", "monte carlo", "se", "z");
    for n in [1usize, 2, 4, 8] {
        let d = duality_check(&sys, &k, part, &phi, &psi, n, 200_000, 11)?;
        println!(
            "{n:>3} {:>14.6e} {:>14.6e} {:>8.1e} {:>6.2}",
            d.matrix_value, d.mc_estimate, d.se, d.z
        );
    }
    println!("\n|z| stays O(1): the matrix and the simulation describe the same process.");
    Ok(())
}
