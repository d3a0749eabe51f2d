//! Simulate random orbits and check that their time averages reproduce the
//! operator's stationary density.
//!
//!     cargo run --example orbits_and_histograms

use transferlab::gallery::gallery_entry;
use transferlab::montecarlo::{birkhoff_histogram, random_orbit};
use transferlab::spectral::{invariant_density, DEFAULT_MAX_ITER, DEFAULT_TOL};
use transferlab::ulam::{build_ulam, Partition};

fn main() -> transferlab::Result<()> {
    let sys = gallery_entry("bernoulli_convolution")?.system;

    // A short orbit: each step halves x and flips a fair coin for the +1/2.
    let orbit = random_orbit(&sys, 0.37, 7, 10)?;
    let pretty: Vec<String> = orbit.iter().map(|x| format!("{x:.4}")).collect();
    println!("orbit from x0=0.37: {}", pretty.join(" -> "));

    // Long-run occupation vs the stationary density of the matrix.
    let n = 32;
    let part = Partition::new(n)?;
    let em = birkhoff_histogram(&sys, part, 0.37, 7, 1_000, 200_000)?;
    let k = build_ulam(&sys, part, 8)?;
    let h = invariant_density(&k, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let worst = (0..n)
        .map(|i| (em.histogram[i] - h[i] / n as f64).abs())
        .fold(0.0f64, f64::max);
    println!(
        "N={n}: max |orbit occupation - stationary mass| = {worst:.2e} over {} steps",
        em.n_avg
    );
    Ok(())
}
