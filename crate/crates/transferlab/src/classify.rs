//! Numerical probes for the operator-class hierarchy
//! S > WAP > MC > AC > C > UC > D > D* (with the mixing/exact side pair),
//! aggregated across a resolution ladder into evidence-graded verdicts.
//!
//! A finite matrix cannot prove membership in any of these classes: every
//! stochastic matrix trivially satisfies all of them. What distinguishes the
//! systems is how the certificates move with resolution, so each probe
//! records per-resolution numbers and the final verdicts come from trend
//! rules plus symbolic kernel rules (atomicity, pinned fixed points,
//! persistent side mass) that encode what grids cannot see.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use crate::error::{Result, TlError};
use crate::rng::Stream;
use crate::spectral::{
    ergodic_decomposition, invariant_density, spectral_gap,
    ErgodicDecomposition, DEFAULT_MAX_ITER, DEFAULT_TOL, DEFAULT_TOL_SPARSE,
};
use crate::stepfn::{l1_norm_curve, pushforward, StepFn};
use crate::system::{apply_random, RandomSystem};
use crate::ulam::{
    apply, build_ulam, dense_stack_step, Partition, TransferMatrix,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ClassTag {
    S,
    Wap,
    Mc,
    Ac,
    C,
    Uc,
    D,
    Dstar,
    Mixing,
    Exact,
}

impl ClassTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            ClassTag::S => "S",
            ClassTag::Wap => "WAP",
            ClassTag::Mc => "MC",
            ClassTag::Ac => "AC",
            ClassTag::C => "C",
            ClassTag::Uc => "UC",
            ClassTag::D => "D",
            ClassTag::Dstar => "Dstar",
            ClassTag::Mixing => "mixing",
            ClassTag::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<ClassTag> {
        Some(match s {
            "S" => ClassTag::S,
            "WAP" => ClassTag::Wap,
            "MC" => ClassTag::Mc,
            "AC" => ClassTag::Ac,
            "C" => ClassTag::C,
            "UC" => ClassTag::Uc,
            "D" => ClassTag::D,
            "Dstar" => ClassTag::Dstar,
            "mixing" => ClassTag::Mixing,
            "exact" => ClassTag::Exact,
            _ => return None,
        })
    }

    /// Position in the inclusion chain, smallest (strongest) class first;
    /// None for the mixing/exact side pair.
    pub fn chain_index(&self) -> Option<usize> {
        Some(match self {
            ClassTag::Dstar => 0,
            ClassTag::D => 1,
            ClassTag::Uc => 2,
            ClassTag::C => 3,
            ClassTag::Ac => 4,
            ClassTag::Mc => 5,
            ClassTag::Wap => 6,
            ClassTag::S => 7,
            _ => return None,
        })
    }

    pub fn all() -> [ClassTag; 10] {
        [
            ClassTag::S,
            ClassTag::Wap,
            ClassTag::Mc,
            ClassTag::Ac,
            ClassTag::C,
            ClassTag::Uc,
            ClassTag::D,
            ClassTag::Dstar,
            ClassTag::Mixing,
            ClassTag::Exact,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    EvidenceFor,
    EvidenceAgainst,
    Inconclusive,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::EvidenceFor => "evidence_for",
            Verdict::EvidenceAgainst => "evidence_against",
            Verdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Matrix,
    KernelSymbolic,
    MonteCarlo,
}

impl Provenance {
    pub fn as_str(&self) -> &'static str {
        match self {
            Provenance::Matrix => "matrix",
            Provenance::KernelSymbolic => "kernel_symbolic",
            Provenance::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProbeResult {
    pub class_tag: ClassTag,
    pub verdict: Verdict,
    pub certificate: Value,
    pub resolution: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct Thresholds {
    /// alpha within this of 1 counts as full concentration (S failure).
    pub near_one: f64,
    /// Constrictivity at or below this is spreading evidence.
    pub c_for: f64,
    /// Constrictivity at or above this is concentration evidence.
    pub c_against: f64,
    /// Fixed-set tail mass must stay below ratio * delta for (AC) evidence.
    pub ac_ratio: f64,
    /// Wide-phi tail mass at delta_min at or above this is (AC) failure.
    pub ac_against: f64,
    /// Thin-witness (vanishing-measure set) mass at or above this is (AC)
    /// failure regardless of the wide path.
    pub ac_thin_against: f64,
    /// Exact-pushforward path: a fixed width-delta interval recurrently
    /// capturing at least this much evolved mass is (AC) failure.
    pub ac_exact_against: f64,
    /// Exact-pushforward path: a measurable set of measure delta capturing at
    /// least this much evolved mass in the tail is (C) failure.
    pub c_exact_against: f64,
    /// Row top-delta mass at or below this (for some n0) supports (UC)/(D).
    pub uc_for: f64,
    /// Relative change under which two resolutions count as stable.
    pub stability: f64,
    /// Smallness level for decayed curves.
    pub small: f64,
    /// Support-fraction drift allowed for the (WAP) stability reading.
    pub wap_supp_drift: f64,
    /// Whole-ladder sup-norm growth ratio at and above which, paired with a
    /// shrinking component support, (WAP) fails.
    pub wap_growth_against: f64,
    /// Sup-norm growth ratio at and below which (WAP) support is stable.
    pub wap_growth_for: f64,
    /// A recurrent component whose support fraction falls to at most this
    /// times its first-ladder value counts as shrinking.
    pub wap_comp_shrink: f64,
    /// Component counts at and above this, growing strictly along the whole
    /// ladder, mark (MC) failure.
    pub mc_r_growth_min: usize,
    /// d_{n_max} <= mc_d_factor / n_max counts as Cesaro convergence.
    pub mc_d_factor: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            near_one: 1e-3,
            c_for: 0.9,
            c_against: 0.999,
            ac_ratio: 5.0,
            ac_against: 0.45,
            ac_thin_against: 0.9,
            ac_exact_against: 0.35,
            c_exact_against: 0.4,
            uc_for: 0.95,
            stability: 0.10,
            small: 1e-3,
            wap_supp_drift: 0.02,
            wap_growth_against: 1.5,
            wap_growth_for: 1.3,
            wap_comp_shrink: 0.6,
            mc_r_growth_min: 8,
            mc_d_factor: 5.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClassifyConfig {
    pub ladder: Vec<usize>,
    pub quadrature: u32,
    pub delta_grid: Vec<f64>,
    pub n0_range: Vec<usize>,
    pub tol_sparse: f64,
    pub thresholds: Thresholds,
    /// Steps for the Cesaro (MC) curve.
    pub mc_steps: usize,
    /// Steps for the TV (D*) curve.
    pub dstar_steps: usize,
    /// Steps for mixing/exactness curves.
    pub mixing_steps: usize,
    /// Whether to run the dense eigensolve at the top resolution.
    pub with_spectral_gap: bool,
    pub collect_curves: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            ladder: vec![64, 128, 256, 512],
            quadrature: 8,
            delta_grid: vec![1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0],
            n0_range: vec![1, 2, 4, 8],
            tol_sparse: DEFAULT_TOL_SPARSE,
            thresholds: Thresholds::default(),
            mc_steps: 128,
            dstar_steps: 50,
            mixing_steps: 50,
            with_spectral_gap: true,
            collect_curves: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CurveData {
    pub name: String,
    pub resolution: usize,
    pub points: Vec<(usize, f64)>,
}

#[derive(Debug, Clone)]
pub struct ClassificationReport {
    pub system_id: String,
    pub ladder: Vec<usize>,
    pub probes: Vec<ProbeResult>,
    pub hierarchy_ok: bool,
    pub curves: Vec<CurveData>,
}

impl ClassificationReport {
    pub fn verdict_of(&self, tag: ClassTag) -> Verdict {
        self.probes
            .iter()
            .find(|p| p.class_tag == tag)
            .map(|p| p.verdict)
            .unwrap_or(Verdict::Inconclusive)
    }

    pub fn to_json(&self) -> Value {
        json!({
            "system_id": self.system_id,
            "ladder": self.ladder,
            "probes": self.probes.iter().map(|p| json!({
                "class_tag": p.class_tag.as_str(),
                "verdict": p.verdict.as_str(),
                "certificate": p.certificate,
                "resolution": p.resolution,
                "provenance": p.provenance.as_str(),
            })).collect::<Vec<_>>(),
            "hierarchy_ok": self.hierarchy_ok,
        })
    }
}

/// Sum of the k largest entries of v.
pub fn top_k_sum(v: &[f64], k: usize) -> f64 {
    if k == 0 {
        return 0.0;
    }
    if k >= v.len() {
        return v.iter().sum();
    }
    let mut buf = v.to_vec();
    let idx = buf.len() - k;
    buf.select_nth_unstable_by(idx, |a, b| a.partial_cmp(b).unwrap());
    buf[idx..].iter().sum()
}

/// Indices of the k largest entries of v.
pub fn top_k_cells(v: &[f64], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[b].partial_cmp(&v[a]).unwrap().then(a.cmp(&b)));
    idx.truncate(k);
    idx.sort_unstable();
    idx
}

// ---------------------------------------------------------------------------
// Individual probes. Each is a pure function of the matrix (and, for the
// kernel rules, of the system definition), returning raw certificates.

/// Worst evolved mass on sets of measure below each delta:
/// alpha(delta) = max_{n <= n_max} (top floor(delta N) cells of 1 K^n) / N.
pub fn straube_probe(
    k: &TransferMatrix,
    delta_grid: &[f64],
    n_max: usize,
) -> Result<(Vec<(f64, f64)>, Vec<(usize, f64)>)> {
    let n = k.n;
    let ks: Vec<usize> = delta_grid.iter().map(|d| ((d * n as f64) as usize).max(1)).collect();
    let mut alpha = vec![0.0f64; delta_grid.len()];
    let mut u = vec![1.0f64; n];
    let mut curve = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        for (ai, &kk) in alpha.iter_mut().zip(&ks) {
            let mass = top_k_sum(&u, kk) / n as f64;
            if mass > *ai {
                *ai = mass;
            }
        }
        curve.push((step, top_k_sum(&u, ks[0]) / n as f64));
        if step < n_max {
            u = apply(k, &u)?;
        }
    }
    Ok((delta_grid.iter().cloned().zip(alpha).collect(), curve))
}

fn translate_starts(n: usize) -> Vec<usize> {
    (0..8).map(|t| t * n / 8).collect()
}

/// Tail concentration of initially concentrated densities:
/// c(delta) = max over translates of max_{n in [n_max/2, n_max]} of the
/// greedy top-delta mass of phi_delta K^n.
pub fn constrictivity_probe(
    k: &TransferMatrix,
    delta_grid: &[f64],
    n_max: usize,
) -> Result<(Vec<(f64, f64)>, Vec<(usize, f64)>)> {
    use rayon::prelude::*;
    let n = k.n;
    let tail_from = n_max / 2;
    let mut out = Vec::with_capacity(delta_grid.len());
    let mut curve: Vec<(usize, f64)> = Vec::new();
    for (di, &delta) in delta_grid.iter().enumerate() {
        let kk = ((delta * n as f64) as usize).max(1);
        let runs: Result<Vec<(f64, Vec<(usize, f64)>)>> = translate_starts(n)
            .into_par_iter()
            .map(|start| {
                let mut u = vec![0.0f64; n];
                let height = n as f64 / kk as f64;
                for j in 0..kk {
                    u[(start + j) % n] = height;
                }
                let mut worst = 0.0f64;
                let mut local_curve = Vec::new();
                for step in 0..=n_max {
                    if step >= tail_from {
                        let mass = top_k_sum(&u, kk) / n as f64;
                        if mass > worst {
                            worst = mass;
                        }
                    }
                    if di == 0 {
                        local_curve.push((step, top_k_sum(&u, kk) / n as f64));
                    }
                    if step < n_max {
                        u = apply(k, &u)?;
                    }
                }
                Ok((worst, local_curve))
            })
            .collect();
        let runs = runs?;
        let c_hat = runs.iter().map(|r| r.0).fold(0.0f64, f64::max);
        if di == 0 {
            // Curve of the worst translate at the smallest delta.
            if let Some((_, lc)) = runs
                .iter()
                .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            {
                curve = lc.clone();
            }
        }
        out.push((delta, c_hat));
    }
    Ok((out, curve))
}

#[derive(Debug, Clone)]
pub struct AcProbe {
    /// (delta, worst fixed-set tail mass from delta-wide initial densities).
    pub wide: Vec<(f64, f64)>,
    /// Best persistent mass on a comb of single cells (measure teeth/N).
    pub thin_value: f64,
    pub thin_teeth: usize,
    pub thin_offset: usize,
    /// Per tooth-count best comb mass: (teeth, offset, value).
    pub thin_by_teeth: Vec<(usize, usize, f64)>,
}

fn prefix_sums(u: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(u.len() + 1);
    let mut s = 0.0f64;
    p.push(0.0);
    for &x in u {
        s += x;
        p.push(s);
    }
    p
}

/// Sum of u over the wrapped index window [start, start+len).
fn window_sum(p: &[f64], n: usize, start: usize, len: usize) -> f64 {
    let start = start % n;
    if start + len <= n {
        p[start + len] - p[start]
    } else {
        (p[n] - p[start]) + p[start + len - n]
    }
}

/// Fixed-set tail masses. The wide path evolves delta-wide blocks and tests
/// candidate sets of measure <= delta (sliding blocks, combs of wide teeth,
/// the top region of the invariant density); the thin path evolves
/// single-cell spikes against combs of single cells whose measure vanishes
/// with N.
pub fn ac_probe(
    k: &TransferMatrix,
    h: &[f64],
    delta_grid: &[f64],
    n_tail: usize,
) -> Result<AcProbe> {
    use rayon::prelude::*;
    let n = k.n;
    let n_max = 2 * n_tail;
    let tooth_counts = [1usize, 2, 4, 8];

    // Wide path.
    let mut wide = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let kk = ((delta * n as f64) as usize).max(1);
        let h_top = top_k_cells(h, kk);
        let per_start: Result<Vec<f64>> = translate_starts(n)
            .into_par_iter()
            .map(|start| {
                let mut u = vec![0.0f64; n];
                let height = n as f64 / kk as f64;
                for j in 0..kk {
                    u[(start + j) % n] = height;
                }
                let mut worst = 0.0f64;
                for step in 0..=n_max {
                    if step >= n_tail {
                        let p = prefix_sums(&u);
                        // Combs of q teeth, each floor(k/q) cells wide.
                        for &q in &tooth_counts {
                            let w = kk / q;
                            if w == 0 {
                                continue;
                            }
                            let stride = n / q;
                            if stride == 0 {
                                continue;
                            }
                            let hop = (w / 2).max(1);
                            let mut o = 0usize;
                            while o < stride {
                                let mut mass = 0.0f64;
                                for t in 0..q {
                                    mass += window_sum(&p, n, o + t * stride, w);
                                }
                                let mass = mass / n as f64;
                                if mass > worst {
                                    worst = mass;
                                }
                                o += hop;
                            }
                        }
                        // Top cells of the invariant density as a fixed set.
                        let mass = h_top.iter().map(|&c| u[c]).sum::<f64>() / n as f64;
                        if mass > worst {
                            worst = mass;
                        }
                    }
                    if step < n_max {
                        u = apply(k, &u)?;
                    }
                }
                Ok(worst)
            })
            .collect();
        let t = per_start?.into_iter().fold(0.0f64, f64::max);
        wide.push((delta, t));
    }

    // Thin path: single-cell initial spikes against single-cell combs at
    // every offset.
    let thin_runs: Result<Vec<Vec<(usize, usize, f64)>>> = translate_starts(n)
        .into_par_iter()
        .map(|start| {
            let mut u = vec![0.0f64; n];
            u[start] = n as f64;
            let mut best: Vec<(usize, usize, f64)> =
                tooth_counts.iter().map(|&q| (q, 0usize, 0.0f64)).collect();
            for step in 0..=n_max {
                if step >= n_tail {
                    for (qi, &q) in tooth_counts.iter().enumerate() {
                        let stride = n / q;
                        if stride == 0 {
                            continue;
                        }
                        // Strided sums for all offsets at once.
                        let mut sums = vec![0.0f64; stride];
                        for (cell, &val) in u.iter().enumerate() {
                            sums[cell % stride] += val;
                        }
                        for (o, &s) in sums.iter().enumerate() {
                            let mass = s / n as f64;
                            if mass > best[qi].2 {
                                best[qi] = (q, o, mass);
                            }
                        }
                    }
                }
                if step < n_max {
                    u = apply(k, &u)?;
                }
            }
            Ok(best)
        })
        .collect();
    let thin_runs = thin_runs?;
    let mut thin_by_teeth: Vec<(usize, usize, f64)> =
        tooth_counts.iter().map(|&q| (q, 0usize, 0.0f64)).collect();
    for run in &thin_runs {
        for (qi, &(q, o, v)) in run.iter().enumerate() {
            if v > thin_by_teeth[qi].2 {
                thin_by_teeth[qi] = (q, o, v);
            }
        }
    }
    let &(bq, bo, bv) = thin_by_teeth
        .iter()
        .max_by(|a, b| a.2.partial_cmp(&b.2).unwrap())
        .expect("tooth family");
    Ok(AcProbe { wide, thin_value: bv, thin_teeth: bq, thin_offset: bo, thin_by_teeth })
}

/// Exact-pushforward block statistics (atomic kernels only). `c_exact` is the
/// largest mass any measurable set of measure delta captures in the tail of
/// the evolution of a width-delta block; `t_exact` restricts the candidate to
/// a fixed interval of width delta (starts on a delta/8 grid). Grids cannot
/// measure either once image blocks shrink below one cell: cell averaging
/// spreads a family of sub-cell blocks into an apparently flat density.
#[derive(Debug, Clone)]
pub struct ExactBlockStats {
    /// Steps reached before the segment guard; tail window is [horizon/2, horizon].
    pub horizon: usize,
    pub c_exact: Vec<(f64, f64)>,
    pub t_exact: Vec<(f64, f64)>,
}

fn block_density(offset: f64, delta: f64) -> StepFn {
    let height = 1.0 / delta;
    let end = offset + delta;
    if offset == 0.0 {
        StepFn::new(vec![0.0, delta, 1.0], vec![height, 0.0])
    } else if end < 1.0 {
        StepFn::new(vec![0.0, offset, end, 1.0], vec![0.0, height, 0.0])
    } else if end > 1.0 {
        StepFn::new(vec![0.0, end - 1.0, offset, 1.0], vec![height, 0.0, height])
    } else {
        StepFn::new(vec![0.0, offset, 1.0], vec![0.0, height])
    }
}

/// Largest mass captured by any interval [s, s+delta) with s on a delta/8 grid
/// (wrapped at 1).
fn max_window_mass(f: &StepFn, delta: f64) -> f64 {
    let prefix = f.prefix_integral();
    let total = *prefix.last().unwrap();
    let step = delta / 8.0;
    let count = (1.0 / step).ceil() as usize;
    let mut best = 0.0f64;
    for j in 0..count {
        let s = j as f64 * step;
        let e = s + delta;
        let mass = if e <= 1.0 {
            f.mass_at(&prefix, e) - f.mass_at(&prefix, s)
        } else {
            total - f.mass_at(&prefix, s) + f.mass_at(&prefix, e - 1.0)
        };
        if mass > best {
            best = mass;
        }
    }
    best
}

pub fn exact_block_probe(
    system: &RandomSystem,
    delta_grid: &[f64],
    n_cap: usize,
) -> Option<ExactBlockStats> {
    use rayon::prelude::*;
    if !system.meta.declared_atomic {
        return None;
    }
    const SEG_GUARD: usize = 300_000;
    const MIN_HORIZON: usize = 6;
    let offsets = [0.0, 0.25, 0.5, 0.75];
    let runs: Vec<(f64, f64, f64, usize)> = delta_grid
        .par_iter()
        .flat_map(|&delta| offsets.par_iter().map(move |&o| (delta, o)))
        .map(|(delta, o)| {
            let mut f = block_density(o, delta);
            let mut hist: Vec<(f64, f64)> = Vec::new();
            for _ in 0..n_cap {
                match pushforward(system, &f) {
                    Ok(g) if g.vs.len() <= SEG_GUARD => f = g,
                    _ => break,
                }
                hist.push((f.greedy_mass(delta), max_window_mass(&f, delta)));
            }
            let horizon = hist.len();
            let tail = &hist[horizon / 2..];
            let c = tail.iter().map(|&(c, _)| c).fold(0.0f64, f64::max);
            let t = tail.iter().map(|&(_, t)| t).fold(0.0f64, f64::max);
            (delta, c, t, horizon)
        })
        .collect();
    let horizon = runs.iter().map(|&(_, _, _, h)| h).min().unwrap_or(0);
    if horizon < MIN_HORIZON {
        return None;
    }
    let mut c_exact = Vec::with_capacity(delta_grid.len());
    let mut t_exact = Vec::with_capacity(delta_grid.len());
    for &delta in delta_grid {
        let c = runs
            .iter()
            .filter(|r| r.0 == delta)
            .map(|r| r.1)
            .fold(0.0f64, f64::max);
        let t = runs
            .iter()
            .filter(|r| r.0 == delta)
            .map(|r| r.2)
            .fold(0.0f64, f64::max);
        c_exact.push((delta, c));
        t_exact.push((delta, t));
    }
    Some(ExactBlockStats { horizon, c_exact, t_exact })
}

/// Cesaro convergence toward the decomposition limits:
/// d_n = max_i || A_n e_i - sum_k lambda_k(e_i) h_k ||_1.
pub fn mc_probe(
    k: &TransferMatrix,
    decomp: &ErgodicDecomposition,
    n_max: usize,
) -> Result<(Vec<(usize, f64)>, f64)> {
    let n = k.n;
    // Limit matrix in mass units: limit[i] = sum_k w_i[k] h_k / N.
    let mut comp_index = vec![usize::MAX; n];
    for (ci, c) in decomp.components.iter().enumerate() {
        for &cell in &c.support {
            comp_index[cell] = ci;
        }
    }
    let mut trans_index = vec![usize::MAX; n];
    for (ti, &cell) in decomp.transient_cells.iter().enumerate() {
        trans_index[cell] = ti;
    }
    let limit: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0f64; n];
            let weights: Vec<f64> = if comp_index[i] != usize::MAX {
                let mut w = vec![0.0; decomp.components.len()];
                w[comp_index[i]] = 1.0;
                w
            } else {
                decomp.absorption[trans_index[i]].clone()
            };
            for (ci, c) in decomp.components.iter().enumerate() {
                if weights[ci] == 0.0 {
                    continue;
                }
                for (j, &hv) in c.density.iter().enumerate() {
                    row[j] += weights[ci] * hv / n as f64;
                }
            }
            row
        })
        .collect();

    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0f64; n];
            row[i] = 1.0;
            row
        })
        .collect();
    let mut acc = m.clone();
    let mut curve = Vec::with_capacity(n_max);
    curve.push((1usize, d_of(&acc, &limit, 1)));
    for step in 2..=n_max {
        m = dense_stack_step(k, &m);
        for (arow, mrow) in acc.iter_mut().zip(&m) {
            for (a, b) in arow.iter_mut().zip(mrow) {
                *a += b;
            }
        }
        curve.push((step, d_of(&acc, &limit, step)));
    }
    let envelope = curve
        .iter()
        .filter(|(s, _)| *s >= 8)
        .map(|(s, d)| *s as f64 * d)
        .fold(0.0f64, f64::max);
    Ok((curve, envelope))
}

fn d_of(acc: &[Vec<f64>], limit: &[Vec<f64>], steps: usize) -> f64 {
    let inv = 1.0 / steps as f64;
    acc.iter()
        .zip(limit)
        .map(|(arow, lrow)| {
            arow.iter().zip(lrow).map(|(a, l)| (a * inv - l).abs()).sum::<f64>()
        })
        .fold(0.0f64, f64::max)
}

#[derive(Debug, Clone)]
pub struct UcProbe {
    /// eps[(n0, delta)] = max_i top floor(delta N) mass of row i of K^{n0}.
    pub eps: Vec<(usize, Vec<(f64, f64)>)>,
    /// Per n0: max_i top (N/2 + 1) mass — the just-over-half side mass.
    pub side_mass: Vec<(usize, f64)>,
    pub declared_atomic: bool,
}

/// Row-wise worst concentration of K^{n0} on small sets, plus atomicity.
pub fn uc_probe(
    k: &TransferMatrix,
    system: &RandomSystem,
    n0_range: &[usize],
    delta_grid: &[f64],
) -> Result<UcProbe> {
    use rayon::prelude::*;
    let n = k.n;
    let max_n0 = n0_range.iter().cloned().max().unwrap_or(1);
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0f64; n];
            row[i] = 1.0;
            row
        })
        .collect();
    let mut eps = Vec::new();
    let mut side = Vec::new();
    let half_plus = n / 2 + 1;
    for step in 1..=max_n0 {
        m = dense_stack_step(k, &m);
        if n0_range.contains(&step) {
            let per_delta: Vec<(f64, f64)> = delta_grid
                .iter()
                .map(|&delta| {
                    let kk = ((delta * n as f64) as usize).max(1);
                    let worst = m
                        .par_iter()
                        .map(|row| top_k_sum(row, kk))
                        .reduce(|| 0.0, f64::max);
                    (delta, worst)
                })
                .collect();
            let side_worst = m
                .par_iter()
                .map(|row| top_k_sum(row, half_plus))
                .reduce(|| 0.0, f64::max);
            eps.push((step, per_delta));
            side.push((step, side_worst));
        }
    }
    Ok(UcProbe { eps, side_mass: side, declared_atomic: system.meta.declared_atomic })
}

#[derive(Debug, Clone)]
pub struct FixedPointRule {
    pub point: f64,
    pub noise_samples: usize,
    pub verified: bool,
}

/// The pinned-point rule for (D): a declared fixed point that every sampled
/// noise parameter leaves in place defeats the for-all-x quantifier on a
/// null set the grid cannot see.
pub fn doeblin_fixed_point_rule(system: &RandomSystem) -> Result<Option<FixedPointRule>> {
    let Some(&point) = system.declared_fixed_points.first() else {
        return Ok(None);
    };
    let noise = system.noise_law();
    let mut stream = Stream::new(0x0d0e_b11d, 0);
    let samples = 1000usize;
    let mut verified = true;
    for _ in 0..samples {
        let t = noise.sample(stream.next_f64());
        if apply_random(system, t, point)? != point {
            verified = false;
            break;
        }
    }
    Ok(Some(FixedPointRule { point, noise_samples: samples, verified }))
}

#[derive(Debug, Clone)]
pub enum DstarProbe {
    MultipleComponents { count: usize },
    Curve {
        s: Vec<(usize, f64)>,
        lambda: f64,
        period: usize,
        max_increase: f64,
    },
}

/// Worst-row total variation distance to the invariant mass vector:
/// s_n = max_i sum_j |K^n[i][j] - pi_j| (the 2 sup_A convention).
pub fn dstar_probe(
    k: &TransferMatrix,
    h: &[f64],
    decomp: &ErgodicDecomposition,
    n_max: usize,
) -> Result<DstarProbe> {
    let n = k.n;
    if decomp.components.len() != 1 {
        return Ok(DstarProbe::MultipleComponents { count: decomp.components.len() });
    }
    let period = decomp.components[0].period;
    let pi: Vec<f64> = h.iter().map(|&x| x / n as f64).collect();
    let mut m: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row = vec![0.0f64; n];
            row[i] = 1.0;
            row
        })
        .collect();
    let mut s = Vec::with_capacity(n_max);
    let mut prev = f64::INFINITY;
    let mut max_increase = 0.0f64;
    for step in 1..=n_max {
        m = dense_stack_step(k, &m);
        let sn = m
            .iter()
            .map(|row| row.iter().zip(&pi).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .fold(0.0f64, f64::max);
        if sn > prev {
            max_increase = max_increase.max(sn - prev);
        }
        prev = sn;
        s.push((step, sn));
    }
    // Geometric fit on the decaying part.
    let pts: Vec<(f64, f64)> = s
        .iter()
        .filter(|(_, v)| *v > 1e-14)
        .map(|(nn, v)| (*nn as f64, v.ln()))
        .collect();
    let lambda = if pts.len() < 2 {
        0.0
    } else {
        let np = pts.len() as f64;
        let sx: f64 = pts.iter().map(|p| p.0).sum();
        let sy: f64 = pts.iter().map(|p| p.1).sum();
        let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
        let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
        ((np * sxy - sx * sy) / (np * sxx - sx * sx)).exp().clamp(0.0, 2.0)
    };
    Ok(DstarProbe::Curve { s, lambda, period, max_increase })
}

#[derive(Debug, Clone)]
pub struct MixingProbe {
    /// Strong L1 norms per battery function, matrix path: max over battery.
    pub strong_matrix: Vec<(usize, f64)>,
    /// Exact step-function path for atomic systems (the alternating-halves
    /// battery function only), when computable.
    pub strong_exact: Option<Vec<(usize, f64)>>,
    /// Weak pairing decay: max over battery pairs.
    pub weak: Vec<(usize, f64)>,
    pub period: usize,
    /// Support too small for a meaningful mean-zero battery; curves are
    /// identically zero and prove nothing either way.
    pub degenerate: bool,
}

fn mixing_battery(n: usize, support: &[usize]) -> Vec<Vec<f64>> {
    let s = support.len();
    let mut battery = Vec::new();
    // Alternating halves of the support (by cell order).
    let mut alt = vec![0.0f64; n];
    for (pos, &cell) in support.iter().enumerate() {
        alt[cell] = if pos < s / 2 { 1.0 } else { -1.0 };
    }
    battery.push(alt);
    // First two Fourier modes as step functions on cell midpoints.
    for mode in 1..=2 {
        for phase in 0..2 {
            let mut f = vec![0.0f64; n];
            for &cell in support {
                let x = (cell as f64 + 0.5) / n as f64;
                let arg = 2.0 * std::f64::consts::PI * mode as f64 * x;
                f[cell] = if phase == 0 { arg.cos() } else { arg.sin() };
            }
            battery.push(f);
        }
    }
    // Center every function on the support.
    for f in &mut battery {
        let mean = support.iter().map(|&c| f[c]).sum::<f64>() / s as f64;
        for &cell in support {
            f[cell] -= mean;
        }
    }
    battery
}

/// Strong (L1-norm) and weak (pairing) decay of mean-zero perturbations
/// supported on the component.
pub fn mixing_exactness_probe(
    k: &TransferMatrix,
    decomp: &ErgodicDecomposition,
    system: Option<&RandomSystem>,
    n_max: usize,
) -> Result<MixingProbe> {
    let comp = decomp
        .components
        .first()
        .ok_or(TlError::EmptySupport)?;
    if comp.period != 1 {
        return Err(TlError::PeriodNotOne { period: comp.period });
    }
    let n = k.n;
    if comp.support.len() < 4 {
        return Ok(MixingProbe {
            strong_matrix: Vec::new(),
            strong_exact: None,
            weak: Vec::new(),
            period: comp.period,
            degenerate: true,
        });
    }
    let battery = mixing_battery(n, &comp.support);
    let mut psis = battery.clone();
    let mut half = vec![0.0f64; n];
    for (pos, &cell) in comp.support.iter().enumerate() {
        if pos < comp.support.len() / 2 {
            half[cell] = 1.0;
        }
    }
    psis.push(half);

    let mut states = battery.clone();
    let mut strong = Vec::with_capacity(n_max + 1);
    let mut weak = Vec::with_capacity(n_max + 1);
    for step in 0..=n_max {
        let strong_n = states
            .iter()
            .map(|u| u.iter().map(|x| x.abs()).sum::<f64>() / n as f64)
            .fold(0.0f64, f64::max);
        let weak_n = states
            .iter()
            .flat_map(|u| {
                psis.iter().map(move |psi| {
                    (u.iter().zip(psi).map(|(a, b)| a * b).sum::<f64>() / n as f64).abs()
                })
            })
            .fold(0.0f64, f64::max);
        strong.push((step, strong_n));
        weak.push((step, weak_n));
        if step < n_max {
            for u in &mut states {
                *u = apply(k, u)?;
            }
        }
    }

    // Exact pushforward path for atomic kinds with full support: sidesteps
    // the grid's averaging, which annihilates fine sign patterns.
    let strong_exact = match system {
        Some(sys) if sys.meta.declared_atomic && comp.support.len() == n => {
            let phi = StepFn::new(vec![0.0, 0.5, 1.0], vec![1.0, -1.0]);
            match l1_norm_curve(sys, &phi, n_max.min(20)) {
                Ok(curve) => Some(curve.into_iter().enumerate().collect()),
                Err(_) => None,
            }
        }
        _ => None,
    };

    Ok(MixingProbe {
        strong_matrix: strong,
        strong_exact,
        weak,
        period: comp.period,
        degenerate: false,
    })
}

// ---------------------------------------------------------------------------
// Multi-resolution aggregation.

struct ResolutionData {
    n: usize,
    straube: Vec<(f64, f64)>,
    cons: Vec<(f64, f64)>,
    ac: AcProbe,
    r: usize,
    mc_d_last: f64,
    mc_steps: usize,
    uc: UcProbe,
    fixed_point: Option<FixedPointRule>,
    dstar: DstarProbe,
    mixing: Option<MixingProbe>,
    mixing_err: Option<usize>,
    supp_frac: f64,
    h_inf: f64,
    /// Per recurrent component: (support fraction, invariant mass).
    comp_stats: Vec<(f64, f64)>,
    max_supp_ok: bool,
    mc_fallback_rows: usize,
    spectral: Option<Vec<f64>>,
    curves: Vec<CurveData>,
}

fn collect_resolution(
    system: &RandomSystem,
    n: usize,
    config: &ClassifyConfig,
    top_of_ladder: bool,
) -> Result<ResolutionData> {
    let part = Partition::new(n)?;
    let k = build_ulam(system, part, config.quadrature)?;
    let h = invariant_density(&k, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    let decomp = ergodic_decomposition(&k, config.tol_sparse)?;

    let mut curves: Vec<CurveData> = Vec::new();
    let mut push_curve = |name: &str, points: Vec<(usize, f64)>| {
        curves.push(CurveData { name: name.to_string(), resolution: n, points });
    };

    let n_evolve = 2 * n;
    let (straube, straube_curve) = straube_probe(&k, &config.delta_grid, n_evolve)?;
    push_curve("straube_topmass", straube_curve);
    let (cons, cons_curve) = constrictivity_probe(&k, &config.delta_grid, n_evolve)?;
    push_curve("constrictivity", cons_curve);
    let ac = ac_probe(&k, &h, &config.delta_grid, n)?;
    let (mc_curve, _mc_env) = mc_probe(&k, &decomp, config.mc_steps)?;
    let mc_d_last = mc_curve.last().map(|&(_, d)| d).unwrap_or(0.0);
    push_curve("cesaro_distance", mc_curve);
    let uc = uc_probe(&k, system, &config.n0_range, &config.delta_grid)?;
    let fixed_point = doeblin_fixed_point_rule(system)?;
    let dstar = dstar_probe(&k, &h, &decomp, config.dstar_steps)?;
    if let DstarProbe::Curve { s, .. } = &dstar {
        push_curve("tv_to_invariant", s.clone());
    }
    let (mixing, mixing_err) =
        match mixing_exactness_probe(&k, &decomp, Some(system), config.mixing_steps) {
            Ok(m) => (Some(m), None),
            Err(TlError::PeriodNotOne { period }) => (None, Some(period)),
            Err(e) => return Err(e),
        };
    if let Some(m) = &mixing {
        push_curve("mixing_weak", m.weak.clone());
        push_curve("mixing_strong_matrix", m.strong_matrix.clone());
        if let Some(se) = &m.strong_exact {
            push_curve("mixing_strong_exact", se.clone());
        }
    }

    let supp_frac = h.iter().filter(|&&x| x > 1e-8).count() as f64 / n as f64;
    let h_inf = h.iter().cloned().fold(0.0f64, f64::max);
    let comp_stats: Vec<(f64, f64)> = decomp
        .components
        .iter()
        .map(|c| {
            let mass = c.support.iter().map(|&i| h[i]).sum::<f64>() / n as f64;
            (c.support.len() as f64 / n as f64, mass)
        })
        .collect();
    let spectral = if top_of_ladder && config.with_spectral_gap && n <= crate::spectral::DENSE_EIG_LIMIT
    {
        spectral_gap(&k, 6).ok()
    } else {
        None
    };

    Ok(ResolutionData {
        n,
        straube,
        cons,
        ac,
        r: decomp.components.len(),
        mc_d_last,
        mc_steps: config.mc_steps,
        uc,
        fixed_point,
        dstar,
        mixing,
        mixing_err,
        supp_frac,
        h_inf,
        comp_stats,
        max_supp_ok: decomp.maximal_support_reached,
        mc_fallback_rows: k.mc_rows.len(),
        spectral,
        curves: if config.collect_curves { curves } else { Vec::new() },
    })
}

#[derive(Debug, Clone)]
struct Evidence {
    verdict: Verdict,
    strength: u8,
    class: ClassTag,
    rule: String,
    provenance: Provenance,
}

fn stable(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-12)
}

fn delta_min(config: &ClassifyConfig) -> f64 {
    config.delta_grid.iter().cloned().fold(f64::INFINITY, f64::min)
}

fn lookup(v: &[(f64, f64)], delta: f64) -> f64 {
    v.iter()
        .find(|(d, _)| (*d - delta).abs() < 1e-12)
        .map(|&(_, x)| x)
        .unwrap_or(f64::NAN)
}

/// Run every probe across the ladder and aggregate verdicts.
pub fn classify(
    system: &RandomSystem,
    system_id: &str,
    config: &ClassifyConfig,
) -> Result<ClassificationReport> {
    if config.ladder.is_empty() || config.ladder.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TlError::InvalidSpec("ladder must be strictly increasing".into()));
    }
    let top_n = *config.ladder.last().unwrap();
    let data: Vec<ResolutionData> = config
        .ladder
        .iter()
        .map(|&n| collect_resolution(system, n, config, n == top_n))
        .collect::<Result<Vec<_>>>()?;

    let th = &config.thresholds;
    let dm = delta_min(config);
    let top = &data[data.len() - 1];
    let prev = if data.len() >= 2 { Some(&data[data.len() - 2]) } else { None };
    // Resolution-free exact path; atomic kernels only.
    let exact = exact_block_probe(system, &config.delta_grid, 80);

    let mut direct: BTreeMap<ClassTag, Vec<Evidence>> = BTreeMap::new();
    let mut add = |tag: ClassTag, verdict: Verdict, strength: u8, rule: String, prov: Provenance| {
        direct.entry(tag).or_default().push(Evidence {
            verdict,
            strength,
            class: tag,
            rule,
            provenance: prov,
        });
    };

    // ---- (S): non-concentration of the evolved uniform density.
    {
        let best = |d: &ResolutionData| -> (f64, f64) {
            d.straube
                .iter()
                .cloned()
                .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                .unwrap()
        };
        let (bd_top, balpha_top) = best(top);
        let against_at = |d: &ResolutionData| d.straube.iter().all(|&(_, a)| a >= 1.0 - th.near_one);
        let for_at = |d: &ResolutionData| d.straube.iter().any(|&(_, a)| a < 1.0 - th.near_one);
        match prev {
            Some(p) => {
                if against_at(top) && against_at(p) {
                    let s = if stable(lookup(&top.straube, dm), lookup(&p.straube, dm), th.stability) { 2 } else { 1 };
                    add(ClassTag::S, Verdict::EvidenceAgainst, s, "alpha near 1 for every delta at top resolutions".into(), Provenance::Matrix);
                } else if for_at(top) && for_at(p) {
                    let (_, balpha_prev) = best(p);
                    let s = if stable(balpha_top, balpha_prev, th.stability) { 2 } else { 1 };
                    add(ClassTag::S, Verdict::EvidenceFor, s, format!("alpha({bd_top}) bounded away from 1"), Provenance::Matrix);
                }
            }
            None => {
                if against_at(top) {
                    add(ClassTag::S, Verdict::EvidenceAgainst, 1, "alpha near 1 (single resolution)".into(), Provenance::Matrix);
                } else if for_at(top) {
                    add(ClassTag::S, Verdict::EvidenceFor, 1, "alpha bounded away from 1 (single resolution)".into(), Provenance::Matrix);
                }
            }
        }
    }

    // ---- (WAP): invariant density with maximal, resolution-stable support.
    {
        // A recurrent component holding fixed mass on a support whose measure
        // vanishes with resolution carries a singular limit: the L1 orbit of
        // any density charging it is not uniformly integrable. Component-level
        // fractions are needed because attractor cell counts move in bursts
        // (a Cantor level splits only every few octaves), so whole-support
        // fractions may plateau between splits.
        let min_comp = |d: &ResolutionData| -> f64 {
            d.comp_stats
                .iter()
                .filter(|&&(_, mass)| mass >= 1e-3)
                .map(|&(frac, _)| frac)
                .fold(f64::INFINITY, f64::min)
        };
        let full_growth = top.h_inf / data[0].h_inf.max(1e-300);
        let comp_shrinks = data.len() >= 2
            && data
                .windows(2)
                .all(|w| min_comp(&w[1]) <= min_comp(&w[0]) * (1.0 + 1e-9))
            && min_comp(top).is_finite()
            && min_comp(top) <= th.wap_comp_shrink * min_comp(&data[0]);
        if comp_shrinks && full_growth >= th.wap_growth_against {
            add(ClassTag::Wap, Verdict::EvidenceAgainst, 2,
                "a recurrent component keeps fixed mass on a support of vanishing measure (sup norm grows)".into(),
                Provenance::Matrix);
        } else if let Some(p) = prev {
            let growth = top.h_inf / p.h_inf.max(1e-300);
            let drift = (top.supp_frac - p.supp_frac).abs();
            let allowed = (2.0 / p.n as f64).max(th.wap_supp_drift * p.supp_frac);
            if top.max_supp_ok
                && drift <= allowed
                && growth <= th.wap_growth_for
                && full_growth <= th.wap_growth_for
            {
                add(ClassTag::Wap, Verdict::EvidenceFor, 2,
                    "maximal support reached and support stable across resolutions".into(),
                    Provenance::Matrix);
            }
        } else if top.max_supp_ok {
            add(ClassTag::Wap, Verdict::EvidenceFor, 1, "maximal support reached (single resolution)".into(), Provenance::Matrix);
        }
    }

    // ---- (MC): Cesaro convergence with a stable component count.
    {
        let r_growing = data.windows(2).all(|w| w[1].r > w[0].r);
        if data.len() >= 2 && r_growing && top.r >= th.mc_r_growth_min {
            add(ClassTag::Mc, Verdict::EvidenceAgainst, 2,
                format!("component count grows with resolution (reaches {})", top.r),
                Provenance::Matrix);
        } else {
            let ok = |d: &ResolutionData| d.mc_d_last <= th.mc_d_factor / d.mc_steps as f64;
            match prev {
                Some(p) => {
                    if top.r == p.r && ok(top) && ok(p) {
                        add(ClassTag::Mc, Verdict::EvidenceFor, 2, "Cesaro averages reach the decomposition limits".into(), Provenance::Matrix);
                    }
                }
                None => {
                    if ok(top) {
                        add(ClassTag::Mc, Verdict::EvidenceFor, 1, "Cesaro averages reach the decomposition limits (single resolution)".into(), Provenance::Matrix);
                    }
                }
            }
        }
    }

    // ---- (AC): fixed-set tail masses.
    {
        if let Some(ex) = &exact {
            let te = lookup(&ex.t_exact, dm);
            if te >= th.ac_exact_against {
                add(ClassTag::Ac, Verdict::EvidenceAgainst, 3,
                    format!(
                        "a fixed interval of measure {dm} recurrently captures {te:.4} of the evolved mass under exact pushforward"
                    ),
                    Provenance::KernelSymbolic);
            }
        }
        let thin_hit = |d: &ResolutionData| d.ac.thin_value >= th.ac_thin_against;
        let wide_hit = |d: &ResolutionData| lookup(&d.ac.wide, dm) >= th.ac_against;
        let for_at = |d: &ResolutionData| {
            d.ac.wide.iter().all(|&(delta, t)| t <= th.ac_ratio * delta)
                && d.ac.thin_value < 0.5
        };
        match prev {
            Some(p) => {
                if thin_hit(top) && thin_hit(p) {
                    add(ClassTag::Ac, Verdict::EvidenceAgainst, 2,
                        format!("persistent mass {:.6} on a {}-cell comb (measure {}/N)",
                                top.ac.thin_value, top.ac.thin_teeth, top.ac.thin_teeth),
                        Provenance::Matrix);
                } else if wide_hit(top) && wide_hit(p) {
                    let s = if stable(lookup(&top.ac.wide, dm), lookup(&p.ac.wide, dm), th.stability) { 2 } else { 1 };
                    add(ClassTag::Ac, Verdict::EvidenceAgainst, s,
                        "tail mass on fixed small sets does not scale down with delta".into(),
                        Provenance::Matrix);
                } else if for_at(top) && for_at(p) {
                    let s = if stable(lookup(&top.ac.wide, dm), lookup(&p.ac.wide, dm), th.stability) { 2 } else { 1 };
                    add(ClassTag::Ac, Verdict::EvidenceFor, s, "fixed-set tail masses scale with delta".into(), Provenance::Matrix);
                }
            }
            None => {
                if thin_hit(top) || wide_hit(top) {
                    add(ClassTag::Ac, Verdict::EvidenceAgainst, 1, "tail concentration (single resolution)".into(), Provenance::Matrix);
                } else if for_at(top) {
                    add(ClassTag::Ac, Verdict::EvidenceFor, 1, "fixed-set tail masses scale with delta (single resolution)".into(), Provenance::Matrix);
                }
            }
        }
    }

    // ---- (C): tail concentration of initially concentrated densities.
    {
        if let Some(ex) = &exact {
            let ce = lookup(&ex.c_exact, dm);
            if ce >= th.c_exact_against {
                add(ClassTag::C, Verdict::EvidenceAgainst, 3,
                    format!(
                        "a set of measure {dm} captures {ce:.4} of the evolved block mass under exact pushforward"
                    ),
                    Provenance::KernelSymbolic);
            }
        }
        let c_at = |d: &ResolutionData| lookup(&d.cons, dm);
        let against_at = |d: &ResolutionData| c_at(d) >= th.c_against;
        let for_at = |d: &ResolutionData| c_at(d) <= th.c_for;
        match prev {
            Some(p) => {
                if against_at(top) && against_at(p) {
                    add(ClassTag::C, Verdict::EvidenceAgainst, 2, "concentrated densities stay fully concentrated".into(), Provenance::Matrix);
                } else if for_at(top) && for_at(p) {
                    let s = if stable(c_at(top), c_at(p), th.stability) { 2 } else { 1 };
                    add(ClassTag::C, Verdict::EvidenceFor, s, "concentrated densities spread".into(), Provenance::Matrix);
                }
            }
            None => {
                if against_at(top) {
                    add(ClassTag::C, Verdict::EvidenceAgainst, 1, "concentrated densities stay concentrated (single resolution)".into(), Provenance::Matrix);
                } else if for_at(top) {
                    add(ClassTag::C, Verdict::EvidenceFor, 1, "concentrated densities spread (single resolution)".into(), Provenance::Matrix);
                }
            }
        }
    }

    // ---- (UC) and the matrix half of (D).
    {
        let m_of = |d: &ResolutionData| -> f64 {
            d.uc
                .eps
                .iter()
                .map(|(_, per)| lookup(per, dm))
                .fold(f64::INFINITY, f64::min)
        };
        if top.uc.declared_atomic {
            add(ClassTag::Uc, Verdict::EvidenceAgainst, 3, "transition kernel is purely atomic".into(), Provenance::KernelSymbolic);
        } else {
            let m_top = m_of(top);
            match prev {
                Some(p) => {
                    let m_prev = m_of(p);
                    let growing = data
                        .windows(2)
                        .all(|w| m_of(&w[1]) > m_of(&w[0]) * (1.0 + th.stability));
                    if m_top >= 1.0 - th.near_one && m_prev >= 1.0 - th.near_one {
                        add(ClassTag::Uc, Verdict::EvidenceAgainst, 2, "rows stay fully concentrated at every n0".into(), Provenance::Matrix);
                    } else if data.len() >= 2 && growing {
                        add(ClassTag::Uc, Verdict::EvidenceAgainst, 2, "row concentration worsens with resolution at every n0".into(), Provenance::Matrix);
                    } else if m_top <= th.uc_for && m_prev <= th.uc_for {
                        let s = if stable(m_top, m_prev, th.stability) { 2 } else { 1 };
                        add(ClassTag::Uc, Verdict::EvidenceFor, s, "rows stay uniformly spread for some n0".into(), Provenance::Matrix);
                    }
                }
                None => {
                    if m_top >= 1.0 - th.near_one {
                        add(ClassTag::Uc, Verdict::EvidenceAgainst, 1, "rows fully concentrated (single resolution)".into(), Provenance::Matrix);
                    } else if m_top <= th.uc_for {
                        add(ClassTag::Uc, Verdict::EvidenceFor, 1, "rows uniformly spread (single resolution)".into(), Provenance::Matrix);
                    }
                }
            }
        }

        // (D): the fixed-point kernel rule dominates its matrix certificate.
        if let Some(rule) = &top.fixed_point {
            if rule.verified {
                add(ClassTag::D, Verdict::EvidenceAgainst, 3,
                    format!("declared fixed point {} survives every sampled noise value", rule.point),
                    Provenance::KernelSymbolic);
            }
        }
        // The matrix certificate for (D) is the same worst-row statistic; it
        // only adds signal where UC produced none (each class still inherits
        // the other's evidence through the chain).
        if !top.uc.declared_atomic && top.fixed_point.as_ref().map_or(true, |r| !r.verified) {
            let m_top = m_of(top);
            if let Some(p) = prev {
                let m_prev = m_of(p);
                if m_top <= th.uc_for && m_prev <= th.uc_for {
                    let s = if stable(m_top, m_prev, th.stability) { 2 } else { 1 };
                    add(ClassTag::D, Verdict::EvidenceFor, s, "uniform row spread with no pinned point".into(), Provenance::Matrix);
                }
            }
        }
    }

    // ---- (D*): TV convergence of worst rows.
    {
        let side_all_one = |d: &ResolutionData| {
            !d.uc.side_mass.is_empty() && d.uc.side_mass.iter().all(|&(_, v)| v >= 1.0 - 1e-9)
        };
        match &top.dstar {
            DstarProbe::MultipleComponents { count } => {
                add(ClassTag::Dstar, Verdict::EvidenceAgainst, 2,
                    format!("no unique invariant density ({count} components)"), Provenance::Matrix);
            }
            DstarProbe::Curve { s, lambda, period, .. } => {
                let s_last = s.last().map(|&(_, v)| v).unwrap_or(f64::INFINITY);
                if side_all_one(top) && prev.map_or(true, side_all_one) {
                    add(ClassTag::Dstar, Verdict::EvidenceAgainst, 3,
                        "every power keeps unit mass on a set of measure just over 1/2".into(),
                        Provenance::KernelSymbolic);
                } else if *period > 1 {
                    add(ClassTag::Dstar, Verdict::EvidenceAgainst, 2,
                        format!("periodic structure (period {period}) blocks TV convergence"),
                        Provenance::Matrix);
                } else if s_last >= 0.5 {
                    add(ClassTag::Dstar, Verdict::EvidenceAgainst, 2, "worst-row TV distance stalls".into(), Provenance::Matrix);
                } else if s_last < th.small && *lambda < 1.0 {
                    let strength = match prev.map(|p| &p.dstar) {
                        Some(DstarProbe::Curve { s: sp, .. }) => {
                            let sp_last = sp.last().map(|&(_, v)| v).unwrap_or(f64::INFINITY);
                            if sp_last < th.small { 2 } else { 1 }
                        }
                        _ => 1,
                    };
                    add(ClassTag::Dstar, Verdict::EvidenceFor, strength,
                        "geometric TV convergence of every row".into(), Provenance::Matrix);
                }
            }
        }
    }

    // ---- mixing / exact.
    {
        if let Some(period) = top.mixing_err {
            add(ClassTag::Mixing, Verdict::EvidenceAgainst, 2,
                format!("periodic structure (period {period})"), Provenance::Matrix);
        }
        if let Some(m) = top.mixing.as_ref().filter(|m| !m.degenerate) {
            let weak_last = m.weak.last().map(|&(_, v)| v).unwrap_or(f64::INFINITY);
            let weak_scale = m.weak.first().map(|&(_, v)| v).unwrap_or(1.0).max(1e-12);
            if weak_last <= th.small * weak_scale {
                add(ClassTag::Mixing, Verdict::EvidenceFor, 2, "weak pairings of mean-zero battery decay".into(), Provenance::Matrix);
            } else if weak_last >= 0.5 * weak_scale {
                add(ClassTag::Mixing, Verdict::EvidenceAgainst, 2, "weak pairings do not decay".into(), Provenance::Matrix);
            }
            let strong = m.strong_exact.as_ref().unwrap_or(&m.strong_matrix);
            let strong_last = strong.last().map(|&(_, v)| v).unwrap_or(f64::INFINITY);
            let strong_scale = strong.first().map(|&(_, v)| v).unwrap_or(1.0).max(1e-12);
            let exact_path = m.strong_exact.is_some();
            if strong_last <= th.small * strong_scale {
                add(ClassTag::Exact, Verdict::EvidenceFor, 2,
                    if exact_path { "exact-pushforward L1 norms vanish".into() } else { "L1 norms of evolved battery vanish".into() },
                    if exact_path { Provenance::KernelSymbolic } else { Provenance::Matrix });
            } else if strong_last >= 0.5 * strong_scale {
                add(ClassTag::Exact, Verdict::EvidenceAgainst, if exact_path { 3 } else { 2 },
                    if exact_path { "exact-pushforward L1 norms stay at their initial value".into() } else { "L1 norms of evolved battery do not decay".into() },
                    if exact_path { Provenance::KernelSymbolic } else { Provenance::Matrix });
            }
        } else if top.mixing_err.is_some() {
            // Period blocks mixing; exactness fails with it.
            add(ClassTag::Exact, Verdict::EvidenceAgainst, 2, "periodic structure".into(), Provenance::Matrix);
        }
    }

    // ---- Propagation through the inclusion chains.
    let chain = [
        ClassTag::Dstar,
        ClassTag::D,
        ClassTag::Uc,
        ClassTag::C,
        ClassTag::Ac,
        ClassTag::Mc,
        ClassTag::Wap,
        ClassTag::S,
    ];
    let side = [ClassTag::Exact, ClassTag::Mixing];
    let mut finals: BTreeMap<ClassTag, (Verdict, Option<Evidence>)> = BTreeMap::new();
    let decide = |pool_for: Vec<&Evidence>, pool_against: Vec<&Evidence>| -> (Verdict, Option<Evidence>) {
        let best_for = pool_for.iter().max_by_key(|e| e.strength);
        let best_against = pool_against.iter().max_by_key(|e| e.strength);
        match (best_for, best_against) {
            (None, None) => (Verdict::Inconclusive, None),
            (Some(f), None) => (Verdict::EvidenceFor, Some((*f).clone())),
            (None, Some(a)) => (Verdict::EvidenceAgainst, Some((*a).clone())),
            (Some(f), Some(a)) => {
                if f.strength > a.strength {
                    (Verdict::EvidenceFor, Some((*f).clone()))
                } else {
                    (Verdict::EvidenceAgainst, Some((*a).clone()))
                }
            }
        }
    };
    for family in [&chain[..], &side[..]] {
        for (i, &tag) in family.iter().enumerate() {
            let mut pool_for: Vec<&Evidence> = Vec::new();
            let mut pool_against: Vec<&Evidence> = Vec::new();
            for (j, &other) in family.iter().enumerate() {
                for e in direct.get(&other).map(|v| v.as_slice()).unwrap_or(&[]) {
                    match e.verdict {
                        Verdict::EvidenceFor if j <= i => pool_for.push(e),
                        Verdict::EvidenceAgainst if j >= i => pool_against.push(e),
                        _ => {}
                    }
                }
            }
            finals.insert(tag, decide(pool_for, pool_against));
        }
    }

    // ---- Certificates.
    let per_res = |f: &dyn Fn(&ResolutionData) -> Value| -> Value {
        Value::Array(data.iter().map(|d| json!({"N": d.n, "data": f(d)})).collect())
    };
    let pairs_json = |v: &[(f64, f64)]| -> Value {
        Value::Array(v.iter().map(|&(a, b)| json!([a, b])).collect())
    };
    let mut probes = Vec::new();
    for tag in ClassTag::all() {
        let (verdict, decisive) = finals.get(&tag).cloned().unwrap_or((Verdict::Inconclusive, None));
        let mut cert = serde_json::Map::new();
        if let Some(e) = &decisive {
            cert.insert("rule".into(), json!(e.rule));
            cert.insert("strength".into(), json!(e.strength));
            if e.class != tag {
                cert.insert(
                    "inherited_from".into(),
                    json!({"class": e.class.as_str(), "verdict": e.verdict.as_str()}),
                );
            }
        }
        let own_rules: Vec<Value> = direct
            .get(&tag)
            .map(|v| {
                v.iter()
                    .map(|e| json!({"verdict": e.verdict.as_str(), "strength": e.strength, "rule": e.rule}))
                    .collect()
            })
            .unwrap_or_default();
        if !own_rules.is_empty() {
            cert.insert("direct_evidence".into(), Value::Array(own_rules));
        }
        match tag {
            ClassTag::S => {
                cert.insert("alpha".into(), per_res(&|d| pairs_json(&d.straube)));
            }
            ClassTag::Wap => {
                cert.insert(
                    "support".into(),
                    per_res(&|d| json!({
                        "support_fraction": d.supp_frac,
                        "sup_norm": d.h_inf,
                        "maximal_support_reached": d.max_supp_ok,
                        "components": d.comp_stats.iter()
                            .map(|&(f, m)| json!({"support_fraction": f, "mass": m}))
                            .collect::<Vec<_>>(),
                    })),
                );
            }
            ClassTag::Mc => {
                cert.insert(
                    "cesaro".into(),
                    per_res(&|d| json!({
                        "components": d.r,
                        "d_last": d.mc_d_last,
                        "steps": d.mc_steps,
                    })),
                );
            }
            ClassTag::Ac => {
                cert.insert(
                    "tail_mass".into(),
                    per_res(&|d| json!({
                        "wide": d.ac.wide.iter().map(|&(a,b)| json!([a,b])).collect::<Vec<_>>(),
                        "thin_value": d.ac.thin_value,
                        "thin_teeth": d.ac.thin_teeth,
                        "thin_offset": d.ac.thin_offset,
                        "thin_measure": d.ac.thin_teeth as f64 / d.n as f64,
                        "thin_by_teeth": d.ac.thin_by_teeth.iter()
                            .map(|&(q,o,v)| json!({"teeth": q, "offset": o, "value": v, "measure": q as f64 / d.n as f64}))
                            .collect::<Vec<_>>(),
                    })),
                );
                if let Some(ex) = &exact {
                    cert.insert(
                        "exact_path".into(),
                        json!({"horizon": ex.horizon, "fixed_interval_mass": pairs_json(&ex.t_exact)}),
                    );
                }
            }
            ClassTag::C => {
                cert.insert("c_hat".into(), per_res(&|d| pairs_json(&d.cons)));
                if let Some(ex) = &exact {
                    cert.insert(
                        "exact_path".into(),
                        json!({"horizon": ex.horizon, "greedy_mass": pairs_json(&ex.c_exact)}),
                    );
                }
            }
            ClassTag::Uc | ClassTag::D => {
                cert.insert(
                    "eps_hat".into(),
                    per_res(&|d| {
                        Value::Array(
                            d.uc.eps
                                .iter()
                                .map(|(n0, per)| json!({"n0": n0, "eps": per.iter().map(|&(a,b)| json!([a,b])).collect::<Vec<_>>()}))
                                .collect(),
                        )
                    }),
                );
                cert.insert("declared_atomic".into(), json!(top.uc.declared_atomic));
                if tag == ClassTag::D {
                    if let Some(rule) = &top.fixed_point {
                        cert.insert(
                            "fixed_point_rule".into(),
                            json!({
                                "point": rule.point,
                                "noise_samples": rule.noise_samples,
                                "verified": rule.verified,
                            }),
                        );
                    }
                }
            }
            ClassTag::Dstar => {
                cert.insert(
                    "tv".into(),
                    per_res(&|d| match &d.dstar {
                        DstarProbe::MultipleComponents { count } => json!({"multiple_components": count}),
                        DstarProbe::Curve { s, lambda, period, max_increase } => json!({
                            "s_last": s.last().map(|&(_, v)| v),
                            "lambda": lambda,
                            "period": period,
                            "max_increase": max_increase,
                        }),
                    }),
                );
                cert.insert(
                    "side_mass".into(),
                    per_res(&|d| {
                        Value::Array(d.uc.side_mass.iter().map(|&(n0, v)| json!([n0, v])).collect())
                    }),
                );
            }
            ClassTag::Mixing | ClassTag::Exact => {
                cert.insert(
                    "decay".into(),
                    per_res(&|d| match (&d.mixing, d.mixing_err) {
                        (Some(m), _) => json!({
                            "weak_last": m.weak.last().map(|&(_, v)| v),
                            "strong_matrix_last": m.strong_matrix.last().map(|&(_, v)| v),
                            "strong_exact_last": m.strong_exact.as_ref().and_then(|c| c.last().map(|&(_, v)| v)),
                        }),
                        (None, Some(p)) => json!({"period": p}),
                        (None, None) => Value::Null,
                    }),
                );
            }
        }
        if tag == ClassTag::S && top.mc_fallback_rows > 0 {
            cert.insert("monte_carlo_rows".into(), json!(top.mc_fallback_rows));
        }
        if tag == ClassTag::Dstar {
            if let Some(sp) = &top.spectral {
                cert.insert("eigenvalue_moduli".into(), json!(sp));
            }
        }
        let provenance = decisive.as_ref().map(|e| e.provenance).unwrap_or(Provenance::Matrix);
        probes.push(ProbeResult {
            class_tag: tag,
            verdict,
            certificate: Value::Object(cert),
            resolution: top.n,
            provenance,
        });
    }

    let report = ClassificationReport {
        system_id: system_id.to_string(),
        ladder: config.ladder.clone(),
        probes,
        hierarchy_ok: true,
        curves: data.into_iter().flat_map(|d| d.curves).collect(),
    };
    let hierarchy_ok = hierarchy_consistent(&report);
    Ok(ClassificationReport { hierarchy_ok, ..report })
}

/// No class may be evidence_for while one of its superclasses is
/// evidence_against.
pub fn hierarchy_consistent(report: &ClassificationReport) -> bool {
    let v = |t: ClassTag| report.verdict_of(t);
    let chain = [
        ClassTag::Dstar,
        ClassTag::D,
        ClassTag::Uc,
        ClassTag::C,
        ClassTag::Ac,
        ClassTag::Mc,
        ClassTag::Wap,
        ClassTag::S,
    ];
    for i in 0..chain.len() {
        for j in (i + 1)..chain.len() {
            if v(chain[i]) == Verdict::EvidenceFor && v(chain[j]) == Verdict::EvidenceAgainst {
                return false;
            }
        }
    }
    !(v(ClassTag::Exact) == Verdict::EvidenceFor && v(ClassTag::Mixing) == Verdict::EvidenceAgainst)
}
