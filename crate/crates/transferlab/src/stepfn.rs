//! Exact pushforward of step-function densities under piecewise-affine
//! random maps with finitely many branches. This sidesteps grid dissipation:
//! the Ulam matrix of an expanding map averages fine-scale sign patterns to
//! zero after about log2(N) steps, while the true operator preserves them.
//!
//! Only atomic kinds (finite IFS, deterministic) are supported; kernel kinds
//! smooth densities outside any finite step-function class.

use crate::error::{Result, TlError};
use crate::system::{PiecewiseAffineMap, RandomSystem, SystemKind};

/// Upper bound on retained segments; expanding maps multiply segment counts
/// by the branch count each step.
pub const MAX_SEGMENTS: usize = 4_000_000;

/// Right-open step function on [0,1]: value `vs[i]` on [xs[i], xs[i+1]).
/// `xs` is strictly increasing from 0 to 1.
#[derive(Debug, Clone)]
pub struct StepFn {
    pub xs: Vec<f64>,
    pub vs: Vec<f64>,
}

impl StepFn {
    pub fn new(xs: Vec<f64>, vs: Vec<f64>) -> Self {
        debug_assert!(xs.len() == vs.len() + 1);
        StepFn { xs, vs }
    }

    pub fn constant(v: f64) -> Self {
        StepFn { xs: vec![0.0, 1.0], vs: vec![v] }
    }

    /// Step function with value `vals[i]` on cell [i/n, (i+1)/n).
    pub fn from_cells(vals: &[f64]) -> Self {
        let n = vals.len();
        let xs = (0..=n).map(|i| i as f64 / n as f64).collect();
        StepFn { xs, vs: vals.to_vec() }
    }

    pub fn integral(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.vs.len() {
            s += self.vs[i] * (self.xs[i + 1] - self.xs[i]);
        }
        s
    }

    pub fn l1_norm(&self) -> f64 {
        let mut s = 0.0;
        for i in 0..self.vs.len() {
            s += self.vs[i].abs() * (self.xs[i + 1] - self.xs[i]);
        }
        s
    }

    pub fn value_at(&self, x: f64) -> f64 {
        let i = self.xs.partition_point(|&b| b <= x);
        self.vs[i.saturating_sub(1).min(self.vs.len() - 1)]
    }

    /// Largest mass a measurable set of measure at most `budget` can capture:
    /// fill from the highest-valued segments down, splitting the last one.
    pub fn greedy_mass(&self, budget: f64) -> f64 {
        let mut segs: Vec<(f64, f64)> = (0..self.vs.len())
            .map(|i| (self.vs[i], self.xs[i + 1] - self.xs[i]))
            .collect();
        segs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut left = budget;
        let mut mass = 0.0;
        for (v, w) in segs {
            if left <= 0.0 || v <= 0.0 {
                break;
            }
            let take = w.min(left);
            mass += v * take;
            left -= take;
        }
        mass
    }

    /// Cumulative mass at each breakpoint; pair with [`StepFn::mass_at`] for
    /// O(log s) interval queries.
    pub fn prefix_integral(&self) -> Vec<f64> {
        let mut acc = Vec::with_capacity(self.xs.len());
        let mut s = 0.0;
        acc.push(0.0);
        for i in 0..self.vs.len() {
            s += self.vs[i] * (self.xs[i + 1] - self.xs[i]);
            acc.push(s);
        }
        acc
    }

    /// Mass on [0, x) given the prefix integral from [`StepFn::prefix_integral`].
    pub fn mass_at(&self, prefix: &[f64], x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return *prefix.last().unwrap();
        }
        let i = self.xs.partition_point(|&b| b <= x).saturating_sub(1).min(self.vs.len() - 1);
        prefix[i] + self.vs[i] * (x - self.xs[i])
    }

    /// Integral over the interval [a, b) within [0,1]; `a <= b` required.
    pub fn mass_on(&self, a: f64, b: f64) -> f64 {
        let mut s = 0.0;
        for i in 0..self.vs.len() {
            let lo = self.xs[i].max(a);
            let hi = self.xs[i + 1].min(b);
            if hi > lo {
                s += self.vs[i] * (hi - lo);
            }
        }
        s
    }

    /// Merge adjacent segments with equal values and drop empty ones.
    fn normalize(mut segs: Vec<(f64, f64, f64)>) -> StepFn {
        segs.retain(|s| s.1 > s.0);
        segs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut xs = vec![0.0];
        let mut vs = Vec::new();
        for (a, b, v) in segs {
            let last = *xs.last().unwrap();
            debug_assert!((a - last).abs() < 1e-9, "gap in pushforward cover");
            if let Some(&lv) = vs.last() {
                if lv == v {
                    *xs.last_mut().unwrap() = b;
                    continue;
                }
            }
            vs.push(v);
            xs.push(b);
        }
        if xs.len() == 1 {
            return StepFn::constant(0.0);
        }
        *xs.last_mut().unwrap() = 1.0;
        StepFn { xs, vs }
    }
}

/// Segments of the image of one branch applied to one step segment, each as
/// (lo, hi, density). An affine piece y = s x + c maps density v to v/|s| on
/// the image; wrap splits images crossing integer boundaries.
fn push_segment(
    map: &PiecewiseAffineMap,
    a: f64,
    b: f64,
    v: f64,
    weight: f64,
    out: &mut Vec<(f64, f64, f64)>,
) -> Result<()> {
    for (i, p) in map.pieces.iter().enumerate() {
        let lo = map.breakpoints[i].max(a);
        let hi = map.breakpoints[i + 1].min(b);
        if hi <= lo {
            continue;
        }
        if p.slope == 0.0 {
            return Err(TlError::ZeroSlopeOverlap { cell: i });
        }
        let dens = weight * v / p.slope.abs();
        let (mut y0, mut y1) = (p.slope * lo + p.intercept, p.slope * hi + p.intercept);
        if y1 < y0 {
            std::mem::swap(&mut y0, &mut y1);
        }
        if !map.wrap {
            out.push((y0.max(0.0), y1.min(1.0), dens));
        } else {
            // Split [y0, y1) at integer boundaries and reduce mod 1.
            let mut lo = y0;
            while lo < y1 - 1e-15 {
                let next = (lo.floor() + 1.0).min(y1);
                let base = lo.floor();
                out.push((lo - base, (next - base).min(1.0), dens));
                lo = next;
            }
        }
    }
    Ok(())
}

/// One application of the transfer operator to a step function, exactly.
/// Overlapping image segments add, realized by splitting at the union of all
/// produced endpoints.
pub fn pushforward(system: &RandomSystem, f: &StepFn) -> Result<StepFn> {
    let branches: Vec<(&PiecewiseAffineMap, f64)> = match &system.kind {
        SystemKind::FiniteIfs { branches, weights } => {
            branches.iter().zip(weights.iter().copied()).collect()
        }
        SystemKind::Deterministic { map } => vec![(map, 1.0)],
        _ => {
            return Err(TlError::InvalidSpec(
                "exact pushforward needs an atomic-kernel system".into(),
            ))
        }
    };

    let mut pieces: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..f.vs.len() {
        if f.vs[i] == 0.0 {
            continue;
        }
        for &(map, w) in &branches {
            push_segment(map, f.xs[i], f.xs[i + 1], f.vs[i], w, &mut pieces)?;
        }
    }

    // Flatten overlaps: split at every endpoint, sum densities per cell.
    let mut cuts: Vec<f64> = Vec::with_capacity(2 * pieces.len() + 2);
    cuts.push(0.0);
    cuts.push(1.0);
    for &(a, b, _) in &pieces {
        cuts.push(a);
        cuts.push(b);
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup();
    if cuts.len() > MAX_SEGMENTS {
        return Err(TlError::InvalidSpec(format!(
            "pushforward exceeded {MAX_SEGMENTS} segments"
        )));
    }

    let mut vals = vec![0.0f64; cuts.len() - 1];
    for &(a, b, v) in &pieces {
        let i0 = cuts.partition_point(|&c| c < a);
        let i1 = cuts.partition_point(|&c| c < b);
        for val in &mut vals[i0..i1] {
            *val += v;
        }
    }

    let segs: Vec<(f64, f64, f64)> =
        (0..vals.len()).map(|i| (cuts[i], cuts[i + 1], vals[i])).collect();
    Ok(StepFn::normalize(segs))
}

/// Iterate [`pushforward`] `n` times, collecting the L1 norm after each step.
pub fn l1_norm_curve(system: &RandomSystem, f0: &StepFn, n: usize) -> Result<Vec<f64>> {
    let mut f = f0.clone();
    let mut curve = Vec::with_capacity(n + 1);
    curve.push(f.l1_norm());
    for _ in 0..n {
        f = pushforward(system, &f)?;
        curve.push(f.l1_norm());
    }
    Ok(curve)
}
