//! Random-orbit simulation, Birkhoff histograms, statistical-basin surveys,
//! annealed correlation curves and the orbit-vs-matrix duality cross-check.
//!
//! Reproducibility contract: every sampler derives its randomness from
//! counter-based streams keyed by (seed, sample index), and parallel results
//! are merged in sample order, so reports are bit-identical for any worker
//! count.

use rayon::prelude::*;

use crate::error::{Result, TlError};
use crate::rng::Stream;
use crate::spectral::ErgodicDecomposition;
use crate::system::{apply_random, RandomSystem};
use crate::ulam::{apply, Partition, TransferMatrix};

pub const DEFAULT_N_BURN: usize = 1_000;
pub const DEFAULT_N_AVG: usize = 100_000;
pub const DEFAULT_BASIN_THRESHOLD: f64 = 0.2;
const SE_BATCHES: usize = 100;

/// Orbit x_0..x_n driven by the noise stream of `seed`.
pub fn random_orbit(system: &RandomSystem, x0: f64, seed: u64, n: usize) -> Result<Vec<f64>> {
    let noise = system.noise_law();
    let mut stream = Stream::new(seed, 0);
    let mut orbit = Vec::with_capacity(n + 1);
    let mut x = x0;
    orbit.push(x);
    for _ in 0..n {
        x = apply_random(system, noise.sample(stream.next_f64()), x)?;
        orbit.push(x);
    }
    Ok(orbit)
}

#[derive(Debug, Clone)]
pub struct EmpiricalMeasure {
    /// Bin masses over the partition, summing to 1.
    pub histogram: Vec<f64>,
    pub n_burn: usize,
    pub n_avg: usize,
    pub seed: u64,
}

/// Histogram of orbit points j in [n_burn, n_burn + n_avg) over the
/// partition.
pub fn birkhoff_histogram(
    system: &RandomSystem,
    part: Partition,
    x0: f64,
    seed: u64,
    n_burn: usize,
    n_avg: usize,
) -> Result<EmpiricalMeasure> {
    let noise = system.noise_law();
    let mut stream = Stream::new(seed, 0);
    let mut x = x0;
    let mut counts = vec![0u64; part.n];
    for j in 0..(n_burn + n_avg) {
        if j >= n_burn {
            counts[part.cell_of(x)] += 1;
        }
        x = apply_random(system, noise.sample(stream.next_f64()), x)?;
    }
    let total = n_avg as f64;
    Ok(EmpiricalMeasure {
        histogram: counts.into_iter().map(|c| c as f64 / total).collect(),
        n_burn,
        n_avg,
        seed,
    })
}

#[derive(Debug, Clone)]
pub struct BasinReport {
    /// Fraction of samples assigned to each component.
    pub fractions: Vec<f64>,
    pub unassigned: f64,
    pub counts: Vec<usize>,
    pub unassigned_count: usize,
    pub n_samples: usize,
    pub threshold: f64,
}

/// Sample (x, noise realization) pairs, compute each orbit's empirical
/// measure, and assign it to the component whose stationary histogram is
/// nearest in L1 (mass) distance, when under the threshold.
#[allow(clippy::too_many_arguments)]
pub fn basin_survey(
    system: &RandomSystem,
    part: Partition,
    decomp: &ErgodicDecomposition,
    n_samples: usize,
    n_burn: usize,
    n_avg: usize,
    threshold: f64,
    seed: u64,
) -> Result<BasinReport> {
    let r = decomp.components.len();
    // Component stationary mass vectors (density / N).
    let targets: Vec<Vec<f64>> = decomp
        .components
        .iter()
        .map(|c| c.density.iter().map(|&d| d / part.n as f64).collect())
        .collect();

    let assignments: Result<Vec<Option<usize>>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let x0 = Stream::new(seed, 2 * s as u64).next_f64();
            let noise = system.noise_law();
            let mut stream = Stream::new(seed, 2 * s as u64 + 1);
            let mut x = x0;
            let mut counts = vec![0u64; part.n];
            for j in 0..(n_burn + n_avg) {
                if j >= n_burn {
                    counts[part.cell_of(x)] += 1;
                }
                x = apply_random(system, noise.sample(stream.next_f64()), x)?;
            }
            let total = n_avg as f64;
            let hist: Vec<f64> = counts.into_iter().map(|c| c as f64 / total).collect();
            let mut best: Option<(usize, f64)> = None;
            for (k, target) in targets.iter().enumerate() {
                let d: f64 = hist.iter().zip(target).map(|(a, b)| (a - b).abs()).sum();
                if best.map_or(true, |(_, bd)| d < bd) {
                    best = Some((k, d));
                }
            }
            Ok(best.filter(|&(_, d)| d < threshold).map(|(k, _)| k))
        })
        .collect();
    let assignments = assignments?;

    let mut counts = vec![0usize; r];
    let mut unassigned_count = 0usize;
    for a in &assignments {
        match a {
            Some(k) => counts[*k] += 1,
            None => unassigned_count += 1,
        }
    }
    let denom = n_samples.max(1) as f64;
    let fractions = counts.iter().map(|&c| c as f64 / denom).collect();
    let unassigned = if n_samples == 0 { 0.0 } else { unassigned_count as f64 / denom };
    Ok(BasinReport { fractions, unassigned, counts, unassigned_count, n_samples, threshold })
}

#[derive(Debug, Clone)]
pub struct CorrelationFit {
    /// C_n for n = 0..=n_max.
    pub curve: Vec<f64>,
    /// |C_n| <= c * rho^n over the fitted points.
    pub c: f64,
    pub rho: f64,
    pub r2: f64,
    /// Indices of the points used in the log-linear fit.
    pub fitted_points: Vec<usize>,
}

/// Grid pairing (1/N) sum a_i b_i.
pub fn pairing(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / a.len() as f64
}

/// Annealed correlation curve C_n = <psi, (phi.h) K^n> - <psi,h><phi,h> with
/// a geometric-envelope fit on the log scale.
pub fn annealed_correlation(
    k: &TransferMatrix,
    h: &[f64],
    phi: &[f64],
    psi: &[f64],
    n_max: usize,
) -> Result<CorrelationFit> {
    for (cell, (&p, &hv)) in phi.iter().zip(h).enumerate() {
        if p != 0.0 && hv <= 0.0 {
            return Err(TlError::SupportViolation { cell });
        }
    }
    let mean_phi = pairing(phi, h);
    let mean_psi = pairing(psi, h);
    let mut state: Vec<f64> = phi.iter().zip(h).map(|(p, hv)| p * hv).collect();
    let mut curve = Vec::with_capacity(n_max + 1);
    curve.push(pairing(psi, &state) - mean_psi * mean_phi);
    for _ in 0..n_max {
        state = apply(k, &state)?;
        curve.push(pairing(psi, &state) - mean_psi * mean_phi);
    }

    // Log-linear least squares on |C_n| above the noise floor.
    let pts: Vec<(f64, f64)> = curve
        .iter()
        .enumerate()
        .filter(|(_, &c)| c.abs() > 1e-14)
        .map(|(n, &c)| (n as f64, c.abs().ln()))
        .collect();
    let fitted_points: Vec<usize> = curve
        .iter()
        .enumerate()
        .filter(|(_, &c)| c.abs() > 1e-14)
        .map(|(n, _)| n)
        .collect();
    let (c, rho, r2) = if pts.len() < 2 {
        (0.0, 0.0, 1.0)
    } else {
        let n = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        let denom = n * sxx - sx * sx;
        let slope = (n * sxy - sx * sy) / denom;
        let intercept = (sy - slope * sx) / n;
        let mean_y = sy / n;
        let ss_tot: f64 = pts.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
        let ss_res: f64 =
            pts.iter().map(|p| (p.1 - slope * p.0 - intercept).powi(2)).sum();
        let r2 = if ss_tot > 0.0 { 1.0 - ss_res / ss_tot } else { 1.0 };
        (intercept.exp(), slope.exp().clamp(0.0, 1.0), r2)
    };
    Ok(CorrelationFit { curve, c, rho, r2, fitted_points })
}

#[derive(Debug, Clone)]
pub struct DualityCheck {
    pub mc_estimate: f64,
    pub se: f64,
    pub matrix_value: f64,
    pub z: f64,
    pub n_samples: usize,
}

/// Compare the orbit average of psi(x_n) phi(x_0) (x_0 uniform, fresh noise
/// per sample) against the matrix value <psi, phi K^n>.
pub fn duality_check(
    system: &RandomSystem,
    k: &TransferMatrix,
    part: Partition,
    phi: &[f64],
    psi: &[f64],
    n: usize,
    n_samples: usize,
    seed: u64,
) -> Result<DualityCheck> {
    let mut state = phi.to_vec();
    for _ in 0..n {
        state = apply(k, &state)?;
    }
    let matrix_value = pairing(psi, &state);

    let values: Result<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|s| {
            let x0 = Stream::new(seed, 2 * s as u64).next_f64();
            let noise = system.noise_law();
            let mut stream = Stream::new(seed, 2 * s as u64 + 1);
            let mut x = x0;
            for _ in 0..n {
                x = apply_random(system, noise.sample(stream.next_f64()), x)?;
            }
            Ok(psi[part.cell_of(x)] * phi[part.cell_of(x0)])
        })
        .collect();
    let values = values?;

    let mc_estimate = values.iter().sum::<f64>() / n_samples.max(1) as f64;
    // Batch-means standard error over contiguous index ranges.
    let b = SE_BATCHES.min(n_samples.max(1));
    let mut means = Vec::with_capacity(b);
    let chunk = n_samples / b.max(1);
    if chunk > 0 {
        for i in 0..b {
            let lo = i * chunk;
            let hi = if i == b - 1 { n_samples } else { lo + chunk };
            means.push(values[lo..hi].iter().sum::<f64>() / (hi - lo) as f64);
        }
    }
    let se = if means.len() > 1 {
        let m = means.iter().sum::<f64>() / means.len() as f64;
        let var = means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (means.len() - 1) as f64;
        (var / means.len() as f64).sqrt()
    } else {
        0.0
    };
    let z = if se > 0.0 { (mc_estimate - matrix_value).abs() / se } else { 0.0 };
    Ok(DualityCheck { mc_estimate, se, matrix_value, z, n_samples })
}
