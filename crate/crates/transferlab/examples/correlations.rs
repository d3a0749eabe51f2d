//! Estimate annealed correlation functions from the matrix and fit their
//! exponential decay rate.
//!
//!     cargo run --example correlations

use transferlab::gallery::gallery_entry;
use transferlab::montecarlo::annealed_correlation;
use transferlab::spectral::{invariant_density, DEFAULT_MAX_ITER, DEFAULT_TOL};
use transferlab::ulam::{build_ulam, Partition};

fn main() -> transferlab::Result<()> {
    // Halve-and-flip-a-coin: correlations of x decay geometrically at 1/2.
    let sys = gallery_entry("bernoulli_convolution")?.system;
    let n = 64;
    let k = build_ulam(&sys, Partition::new(n)?, 8)?;
    let h = invariant_density(&k, DEFAULT_TOL, DEFAULT_MAX_ITER)?;

    // phi = psi = x sampled at cell midpoints.
    let phi: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    let fit = annealed_correlation(&k, &h, &phi, &phi, 12)?;

    println!("C_n for the coin-flip contraction, phi = x, N={n}:");
    for (i, c) in fit.curve.iter().enumerate() {
        println!("  n={i:2}: {c:+.3e}");
    }
    println!(
        "fitted |C_n| <= {:.4} * {:.4}^n (r^2 = {:.4}, {} points)",
        fit.c,
        fit.rho,
        fit.r2,
        fit.fitted_points.len()
    );

    // Contrast: a deterministic expanding map pushes all correlation mass
    // past the grid's resolution in log2(N) steps.
    let sys = gallery_entry("deterministic_doubling")?.system;
    let k = build_ulam(&sys, Partition::new(n)?, 8)?;
    let h = invariant_density(&k, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let fit = annealed_correlation(&k, &h, &phi, &phi, 12)?;
    let first_flat = fit.curve.iter().position(|c| c.abs() < 1e-14).unwrap_or(12);
    println!(
        "\ndoubling map: C_n vanishes from n = {first_flat} on (grid resolves log2(N) = {} steps)",
        n.trailing_zeros()
    );
    Ok(())
}
