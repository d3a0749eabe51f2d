//! Ulam discretization of the annealed transfer operator: the row-stochastic
//! matrix K[i][j] = N * integral over A_i of P(x, A_j) dx on the uniform
//! partition A_i = [i/N, (i+1)/N).
//!
//! Two build paths:
//! - exact affine preimages for finitely-branched atomic systems (finite IFS,
//!   deterministic), rows summing to 1 exactly via compensated summation;
//! - Gauss-Legendre quadrature in x composed with exact noise-interval masses
//!   in y for kernel systems, with a per-row Monte Carlo fallback where the
//!   kernel degenerates to an atom at a quadrature node.
//!
//! Densities act as row vectors (u' = uK); observables via the adjoint.

use rayon::prelude::*;

use crate::error::{Result, TlError};
use crate::rng::Stream;
use crate::system::{
    apply_random, kernel_interval_mass, PiecewiseAffineMap, RandomSystem, SystemKind,
};

/// Entries below this are dropped at build time (before renormalization).
pub const SPARSE_DROP: f64 = 1e-14;
/// Maximum tolerated pre-normalization row defect for quadrature builds.
pub const ROW_DEFECT_LIMIT: f64 = 1e-6;
/// Row sums within this of 1 count as stochastic in [`restrict`].
pub const STOCHASTIC_TOL: f64 = 1e-10;
/// Seed for the Monte Carlo fallback rows; fixed so builds are reproducible.
const MC_ROW_SEED: u64 = 0x7464_6972_6e61_6d21;

/// Uniform partition of [0,1] into N cells [i/N, (i+1)/N), the last closed.
#[derive(Debug, Clone, Copy)]
pub struct Partition {
    pub n: usize,
}

impl Partition {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(TlError::InvalidSpec(format!("partition needs N >= 2, got {n}")));
        }
        Ok(Partition { n })
    }

    pub fn cell_of(&self, x: f64) -> usize {
        ((x * self.n as f64) as usize).min(self.n - 1)
    }

    pub fn lo(&self, i: usize) -> f64 {
        i as f64 / self.n as f64
    }

    pub fn hi(&self, i: usize) -> f64 {
        (i + 1) as f64 / self.n as f64
    }

    pub fn measure(&self) -> f64 {
        1.0 / self.n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuildMethod {
    ExactPreimage,
    Quadrature(u32),
    MonteCarlo(u64),
}

impl std::fmt::Display for BuildMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BuildMethod::ExactPreimage => write!(f, "exact_preimage"),
            BuildMethod::Quadrature(q) => write!(f, "quadrature({q})"),
            BuildMethod::MonteCarlo(s) => write!(f, "monte_carlo({s})"),
        }
    }
}

impl std::str::FromStr for BuildMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "exact_preimage" {
            return Ok(BuildMethod::ExactPreimage);
        }
        if let Some(rest) = s.strip_prefix("quadrature(").and_then(|r| r.strip_suffix(')')) {
            return rest.parse().map(BuildMethod::Quadrature).map_err(|e| e.to_string());
        }
        if let Some(rest) = s.strip_prefix("monte_carlo(").and_then(|r| r.strip_suffix(')')) {
            return rest.parse().map(BuildMethod::MonteCarlo).map_err(|e| e.to_string());
        }
        Err(format!("unknown build method {s:?}"))
    }
}

/// Row-stochastic sparse transfer matrix. Row entries are sorted by column.
#[derive(Debug, Clone)]
pub struct TransferMatrix {
    pub n: usize,
    pub rows: Vec<Vec<(u32, f64)>>,
    /// |1 - row sum| before renormalization, per row.
    pub row_defects: Vec<f64>,
    pub build_method: BuildMethod,
    /// Rows built by the Monte Carlo fallback (quadrature path only).
    pub mc_rows: Vec<usize>,
}

/// Compensated (Neumaier) summation; exact to the last bit for the row
/// magnitudes that occur here.
pub fn neumaier_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut s = 0.0f64;
    let mut c = 0.0f64;
    for x in xs {
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

impl TransferMatrix {
    pub fn max_row_defect(&self) -> f64 {
        self.row_defects.iter().cloned().fold(0.0, f64::max)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(|r| r.len()).sum()
    }

    pub fn row_sum(&self, i: usize) -> f64 {
        neumaier_sum(self.rows[i].iter().map(|&(_, v)| v))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.n];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                out[i][j as usize] = v;
            }
        }
        out
    }

    /// Build directly from a dense row-major matrix (tests and small oracles).
    pub fn from_dense(rows: &[Vec<f64>], build_method: BuildMethod) -> Self {
        let n = rows.len();
        let mut out = Vec::with_capacity(n);
        let mut defects = Vec::with_capacity(n);
        for r in rows {
            let mut row: Vec<(u32, f64)> =
                r.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(j, &v)| (j as u32, v)).collect();
            row.sort_by_key(|&(j, _)| j);
            defects.push((1.0 - neumaier_sum(row.iter().map(|&(_, v)| v))).abs());
            out.push(row);
        }
        TransferMatrix { n, rows: out, row_defects: defects, build_method, mc_rows: Vec::new() }
    }
}

/// Compress a dense row: drop tiny entries, renormalize so the compensated
/// sum is exactly 1.0, nudging the largest entry by the residual.
fn finish_row(dense: &[f64]) -> (Vec<(u32, f64)>, f64) {
    let raw_sum = neumaier_sum(dense.iter().copied());
    let defect = (1.0 - raw_sum).abs();
    let mut row: Vec<(u32, f64)> = dense
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= SPARSE_DROP)
        .map(|(j, &v)| (j as u32, v))
        .collect();
    let kept = neumaier_sum(row.iter().map(|&(_, v)| v));
    if kept > 0.0 {
        for e in &mut row {
            e.1 /= kept;
        }
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .map(|(k, _)| k)
            .unwrap();
        for _ in 0..8 {
            let s = neumaier_sum(row.iter().map(|&(_, v)| v));
            let d = 1.0 - s;
            if d == 0.0 {
                break;
            }
            row[argmax].1 += d;
        }
    }
    (row, defect)
}

/// Accumulate the image of the x-interval [lo,hi) under one affine piece into
/// a dense row, with total mass `mass_scale * (hi - lo) * N`.
fn scatter_affine_image(
    slope: f64,
    intercept: f64,
    wrap: bool,
    lo: f64,
    hi: f64,
    weight: f64,
    part: &Partition,
    dense: &mut [f64],
) -> Result<()> {
    let nf = part.n as f64;
    if slope == 0.0 {
        let mut y = intercept;
        if wrap {
            y = y.rem_euclid(1.0);
        }
        if !(0.0..=1.0).contains(&y) {
            return Err(TlError::ZeroSlopeOverlap { cell: part.cell_of(lo) });
        }
        dense[part.cell_of(y)] += weight * (hi - lo) * nf;
        return Ok(());
    }
    let (mut y0, mut y1) = (slope * lo + intercept, slope * hi + intercept);
    if y1 < y0 {
        std::mem::swap(&mut y0, &mut y1);
    }
    let density = weight * nf / slope.abs();
    let mut spans: Vec<(f64, f64)> = Vec::new();
    if wrap {
        let mut a = y0;
        while a < y1 - 1e-15 {
            let base = a.floor();
            let b = (base + 1.0).min(y1);
            spans.push((a - base, (b - base).min(1.0)));
            a = b;
        }
    } else {
        spans.push((y0.max(0.0), y1.min(1.0)));
    }
    for (a, b) in spans {
        if b <= a {
            continue;
        }
        let j0 = ((a * nf) as usize).min(part.n - 1);
        let mut j = j0;
        while j < part.n && part.lo(j) < b {
            let ov = (part.hi(j).min(b) - part.lo(j).max(a)).max(0.0);
            if ov > 0.0 {
                dense[j] += density * ov;
            }
            j += 1;
        }
    }
    Ok(())
}

/// Exact-preimage Ulam build for finite IFS and deterministic systems.
pub fn build_ulam_ifs(system: &RandomSystem, part: Partition) -> Result<TransferMatrix> {
    let branches: Vec<(&PiecewiseAffineMap, f64)> = match &system.kind {
        SystemKind::FiniteIfs { branches, weights } => {
            branches.iter().zip(weights.iter().copied()).collect()
        }
        SystemKind::Deterministic { map } => vec![(map, 1.0)],
        _ => {
            return Err(TlError::InvalidSpec(
                "exact preimage build needs a finite IFS or deterministic system".into(),
            ))
        }
    };
    let n = part.n;
    let built: Result<Vec<(Vec<(u32, f64)>, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (lo_i, hi_i) = (part.lo(i), part.hi(i));
            let mut dense = vec![0.0f64; n];
            for &(map, w) in &branches {
                for (k, p) in map.pieces.iter().enumerate() {
                    let lo = map.breakpoints[k].max(lo_i);
                    let hi = map.breakpoints[k + 1].min(hi_i);
                    if hi <= lo {
                        continue;
                    }
                    scatter_affine_image(p.slope, p.intercept, map.wrap, lo, hi, w, &part, &mut dense)?;
                }
            }
            Ok(finish_row(&dense))
        })
        .collect();
    let built = built?;
    let (rows, row_defects): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    Ok(TransferMatrix {
        n,
        rows,
        row_defects,
        build_method: BuildMethod::ExactPreimage,
        mc_rows: Vec::new(),
    })
}

/// Gauss-Legendre nodes and weights on [-1,1] via Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(q: u32) -> (Vec<f64>, Vec<f64>) {
    let q = q as usize;
    let mut nodes = vec![0.0; q];
    let mut weights = vec![0.0; q];
    for k in 0..(q + 1) / 2 {
        let mut x = (std::f64::consts::PI * (k as f64 + 0.75) / (q as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let mut p0 = 1.0f64;
            let mut p1 = x;
            for m in 2..=q {
                let mf = m as f64;
                let p2 = ((2.0 * mf - 1.0) * x * p1 - (mf - 1.0) * p0) / mf;
                p0 = p1;
                p1 = p2;
            }
            dp = q as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        nodes[k] = -x;
        nodes[q - 1 - k] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[k] = w;
        weights[q - 1 - k] = w;
    }
    if q % 2 == 1 && q == 1 {
        nodes[0] = 0.0;
        weights[0] = 2.0;
    }
    (nodes, weights)
}

fn mc_fallback_row(
    system: &RandomSystem,
    part: &Partition,
    i: usize,
    samples: u64,
) -> Result<Vec<f64>> {
    let noise = system.noise_law();
    let mut xs = Stream::new(MC_ROW_SEED, 2 * i as u64);
    let mut ts = Stream::new(MC_ROW_SEED, 2 * i as u64 + 1);
    let (lo, hi) = (part.lo(i), part.hi(i));
    let mut dense = vec![0.0f64; part.n];
    let w = 1.0 / samples as f64;
    for _ in 0..samples {
        let x = lo + (hi - lo) * xs.next_f64();
        let t = noise.sample(ts.next_f64());
        let y = apply_random(system, t, x)?;
        dense[part.cell_of(y)] += w;
    }
    Ok(dense)
}

/// Quadrature Ulam build for kernel systems (additive, multiplicative, blend
/// noise). Where the kernel is atomic at a quadrature node the whole row
/// falls back to Monte Carlo with 10^4 * q samples and is flagged.
pub fn build_ulam_kernel(system: &RandomSystem, part: Partition, q: u32) -> Result<TransferMatrix> {
    if system.is_atomic_kind() {
        return Err(TlError::InvalidSpec(
            "quadrature build needs a kernel system (additive, multiplicative or blend noise)"
                .into(),
        ));
    }
    let n = part.n;
    let nf = n as f64;
    let (gl_nodes, gl_weights) = gauss_legendre(q);
    let mc_samples = 10_000u64 * q as u64;

    let built: Result<Vec<(Vec<(u32, f64)>, f64, bool)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let (lo, hi) = (part.lo(i), part.hi(i));
            let mid = 0.5 * (lo + hi);
            let half = 0.5 * (hi - lo);
            let mut dense = vec![0.0f64; n];
            let mut atomic_node = false;
            'nodes: for (xi, wq) in gl_nodes.iter().zip(&gl_weights) {
                let x = mid + half * xi;
                // integral over A_i approximated with weights summing to 1/N,
                // then scaled by N: net node weight half * wq * N.
                let node_w = half * wq * nf;
                for j in 0..n {
                    match kernel_interval_mass(system, x, part.lo(j), part.hi(j)) {
                        Some(m) => dense[j] += node_w * m,
                        None => {
                            atomic_node = true;
                            break 'nodes;
                        }
                    }
                }
            }
            if atomic_node {
                dense = mc_fallback_row(system, &part, i, mc_samples)?;
            }
            let (row, defect) = finish_row(&dense);
            if !atomic_node && defect > ROW_DEFECT_LIMIT {
                return Err(TlError::RowDefectTooLarge { row: i, defect, limit: ROW_DEFECT_LIMIT });
            }
            Ok((row, defect, atomic_node))
        })
        .collect();
    let built = built?;
    let mut rows = Vec::with_capacity(n);
    let mut row_defects = Vec::with_capacity(n);
    let mut mc_rows = Vec::new();
    for (i, (row, defect, mc)) in built.into_iter().enumerate() {
        rows.push(row);
        row_defects.push(defect);
        if mc {
            mc_rows.push(i);
        }
    }
    Ok(TransferMatrix { n, rows, row_defects, build_method: BuildMethod::Quadrature(q), mc_rows })
}

/// Build with the method appropriate to the system kind.
pub fn build_ulam(system: &RandomSystem, part: Partition, q: u32) -> Result<TransferMatrix> {
    if system.is_atomic_kind() {
        build_ulam_ifs(system, part)
    } else {
        build_ulam_kernel(system, part, q)
    }
}

/// Full Monte Carlo build: every row estimated from `samples` draws of
/// (x, t) with x uniform in the cell. Works for any system kind; slow and
/// noisy, used as a cross-check oracle.
pub fn build_ulam_mc(
    system: &RandomSystem,
    part: Partition,
    samples: u64,
) -> Result<TransferMatrix> {
    if samples == 0 {
        return Err(TlError::InvalidSpec("monte_carlo build needs samples > 0".into()));
    }
    let n = part.n;
    let built: Result<Vec<(Vec<(u32, f64)>, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dense = mc_fallback_row(system, &part, i, samples)?;
            Ok(finish_row(&dense))
        })
        .collect();
    let built = built?;
    let (rows, row_defects): (Vec<_>, Vec<_>) = built.into_iter().unzip();
    Ok(TransferMatrix {
        n,
        rows,
        row_defects,
        build_method: BuildMethod::MonteCarlo(samples),
        mc_rows: (0..n).collect(),
    })
}

/// Forward action on a cell-density row vector: u'_j = sum_i u_i K[i][j].
pub fn apply(k: &TransferMatrix, u: &[f64]) -> Result<Vec<f64>> {
    if u.len() != k.n {
        return Err(TlError::DimensionMismatch { expected: k.n, got: u.len() });
    }
    let mut out = vec![0.0f64; k.n];
    for (i, row) in k.rows.iter().enumerate() {
        let ui = u[i];
        if ui == 0.0 {
            continue;
        }
        for &(j, v) in row {
            out[j as usize] += ui * v;
        }
    }
    Ok(out)
}

/// Adjoint action on observables: g'_i = sum_j K[i][j] g_j.
pub fn apply_adjoint(k: &TransferMatrix, g: &[f64]) -> Result<Vec<f64>> {
    if g.len() != k.n {
        return Err(TlError::DimensionMismatch { expected: k.n, got: g.len() });
    }
    Ok(k.rows
        .iter()
        .map(|row| row.iter().map(|&(j, v)| v * g[j as usize]).sum())
        .collect())
}

/// Cesaro average (1/n) sum_{i=0}^{n-1} u K^i by running sum.
pub fn cesaro(k: &TransferMatrix, u: &[f64], n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(TlError::InvalidSpec("cesaro needs n >= 1".into()));
    }
    let mut cur = u.to_vec();
    let mut acc = u.to_vec();
    for _ in 1..n {
        cur = apply(k, &cur)?;
        for (a, c) in acc.iter_mut().zip(&cur) {
            *a += c;
        }
    }
    let nf = n as f64;
    Ok(acc.into_iter().map(|a| a / nf).collect())
}

/// Restriction K_S (possibly substochastic) plus a flag that is true iff
/// every restricted row still sums to 1 within 1e-10.
pub fn restrict(k: &TransferMatrix, cells: &[usize]) -> Result<(TransferMatrix, bool)> {
    if cells.is_empty() {
        return Err(TlError::EmptySupport);
    }
    let mut index = vec![usize::MAX; k.n];
    for (local, &c) in cells.iter().enumerate() {
        index[c] = local;
    }
    let mut rows = Vec::with_capacity(cells.len());
    let mut defects = Vec::with_capacity(cells.len());
    let mut stochastic = true;
    for &c in cells {
        let row: Vec<(u32, f64)> = k.rows[c]
            .iter()
            .filter(|&&(j, _)| index[j as usize] != usize::MAX)
            .map(|&(j, v)| (index[j as usize] as u32, v))
            .collect();
        let mut row = row;
        row.sort_by_key(|&(j, _)| j);
        let s = neumaier_sum(row.iter().map(|&(_, v)| v));
        if (1.0 - s).abs() > STOCHASTIC_TOL {
            stochastic = false;
        }
        defects.push((1.0 - s).abs());
        rows.push(row);
    }
    Ok((
        TransferMatrix {
            n: cells.len(),
            rows,
            row_defects: defects,
            build_method: k.build_method,
            mc_rows: Vec::new(),
        },
        stochastic,
    ))
}

/// Renormalize every row to sum exactly 1 (used on restrictions of recurrent
/// classes, where the defect is pure float residue).
pub fn renormalize_rows(k: &mut TransferMatrix) {
    for row in &mut k.rows {
        if row.is_empty() {
            continue;
        }
        let dense_sum = neumaier_sum(row.iter().map(|&(_, v)| v));
        if dense_sum <= 0.0 {
            continue;
        }
        for e in row.iter_mut() {
            e.1 /= dense_sum;
        }
        let argmax = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .1.partial_cmp(&b.1 .1).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        for _ in 0..8 {
            let s = neumaier_sum(row.iter().map(|&(_, v)| v));
            let d = 1.0 - s;
            if d == 0.0 {
                break;
            }
            row[argmax].1 += d;
        }
    }
}

/// One dense-row right multiplication: out = row . K.
pub fn dense_row_step(k: &TransferMatrix, row: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0f64; k.n];
    for (i, &ri) in row.iter().enumerate() {
        if ri == 0.0 {
            continue;
        }
        for &(j, v) in &k.rows[i] {
            out[j as usize] += ri * v;
        }
    }
    out
}

/// Right-multiply a stack of dense rows by K, in parallel over rows. Output
/// is deterministic for any thread count (each row computed independently).
pub fn dense_stack_step(k: &TransferMatrix, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    rows.par_iter().map(|r| dense_row_step(k, r)).collect()
}
