//! Compute the stationary density of the discretized operator and compare it
//! with the known uniform answer for a measure-preserving system.
//!
//!     cargo run --example invariant_density

use transferlab::gallery::gallery_entry;
use transferlab::spectral::{invariant_density, DEFAULT_MAX_ITER, DEFAULT_TOL};
use transferlab::ulam::{build_ulam, Partition};

fn main() -> transferlab::Result<()> {
    // The doubling map preserves Lebesgue measure, so the density is flat.
    let sys = gallery_entry("deterministic_doubling")?.system;
    for n in [64usize, 256, 1024] {
        let k = build_ulam(&sys, Partition::new(n)?, 8)?;
        let h = invariant_density(&k, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let err = h.iter().map(|&v| (v - 1.0).abs()).fold(0.0f64, f64::max);
        println!("doubling N={n:5}: max |h - 1| = {err:.2e}");
    }

    // A contraction with multiplicative noise concentrates its stationary
    // mass near the pinned origin instead.
    let sys = gallery_entry("mult_contraction")?.system;
    let n = 256;
    let k = build_ulam(&sys, Partition::new(n)?, 8)?;
    let h = invariant_density(&k, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let first: f64 = h[..8].iter().sum::<f64>() / n as f64;
    println!("\ncontraction N={n}: mass in [0, 8/{n}) = {first:.4} (most of it)");
    let tail: f64 = h[n / 2..].iter().sum::<f64>() / n as f64;
    println!("contraction N={n}: mass in [1/2, 1)  = {tail:.2e}");
    Ok(())
}
