//! Invariant densities, ergodic decomposition, periodic structure,
//! absorption weights and spectral-gap estimates of a transfer matrix.
//!
//! Components are found combinatorially (strongly connected components of
//! the support graph with no outgoing edges), not spectrally; this stays
//! robust when eigenvalues crowd the unit circle.

use rayon::prelude::*;

use crate::error::{Result, TlError};
use crate::ulam::{apply, apply_adjoint, renormalize_rows, restrict, TransferMatrix};

pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_TOL_SPARSE: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 200_000;

/// Mean absolute difference (1/N) sum |u_i - v_i|; the L1 distance of
/// cell-averaged densities.
pub fn l1_density_distance(u: &[f64], v: &[f64]) -> f64 {
    let n = u.len() as f64;
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).sum::<f64>() / n
}

/// Stationary density by damped power iteration from the uniform density.
/// Each step averages the current iterate with its image (u + uK)/2, which
/// quenches rotating spectrum on the unit circle while leaving fixed vectors
/// untouched; the residual is measured against K itself.
pub fn invariant_density(k: &TransferMatrix, tol: f64, max_iter: usize) -> Result<Vec<f64>> {
    let mut u = vec![1.0f64; k.n];
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let v = apply(k, &u)?;
        residual = l1_density_distance(&v, &u);
        if residual <= tol {
            return Ok(u);
        }
        for (ui, vi) in u.iter_mut().zip(&v) {
            *ui = 0.5 * (*ui + vi);
        }
    }
    Err(TlError::NoConvergence { iterations: max_iter, residual })
}

#[derive(Debug, Clone)]
pub struct ErgodicComponent {
    /// Cells of the component, ascending.
    pub support: Vec<usize>,
    /// Stationary density embedded in the full grid (zero off the support,
    /// mean 1 over all N cells).
    pub density: Vec<f64>,
    pub period: usize,
    /// Partition of the support into period-many classes; one step of the
    /// matrix maps class c onto class c+1 (mod period).
    pub cyclic_classes: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct ErgodicDecomposition {
    pub components: Vec<ErgodicComponent>,
    pub transient_cells: Vec<usize>,
    /// Per transient cell (aligned with `transient_cells`), the limiting mass
    /// fractions sent to each component.
    pub absorption: Vec<Vec<f64>>,
    /// Whether iterating the adjoint on the union of supports reached 1
    /// everywhere (within 1e-8) inside the default horizon.
    pub maximal_support_reached: bool,
}

/// Iterative Tarjan strongly-connected components over the support graph
/// (edge i -> j iff K[i][j] > tol_sparse). Returns (component id per node,
/// component count); ids follow reverse topological order.
fn tarjan_scc(k: &TransferMatrix, tol_sparse: f64) -> (Vec<usize>, usize) {
    let n = k.n;
    const NONE: usize = usize::MAX;
    let mut index = vec![NONE; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comp = vec![NONE; n];
    let mut next_index = 0usize;
    let mut ncomp = 0usize;

    // Explicit DFS frames: (node, edge cursor).
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != NONE {
            continue;
        }
        frames.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&(v, cursor_start)) = frames.last() {
            let row = &k.rows[v];
            let mut cursor = cursor_start;
            let mut advanced = false;
            while cursor < row.len() {
                let (j, val) = row[cursor];
                cursor += 1;
                if val <= tol_sparse {
                    continue;
                }
                let w = j as usize;
                if index[w] == NONE {
                    frames.last_mut().expect("frame").1 = cursor;
                    index[w] = next_index;
                    low[w] = next_index;
                    next_index += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                    advanced = true;
                    break;
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            }
            if advanced {
                continue;
            }
            frames.pop();
            if let Some(&(parent, _)) = frames.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                loop {
                    let w = stack.pop().expect("tarjan stack");
                    on_stack[w] = false;
                    comp[w] = ncomp;
                    if w == v {
                        break;
                    }
                }
                ncomp += 1;
            }
        }
    }
    (comp, ncomp)
}

/// Period of an irreducible directed graph (given as the cell list and the
/// supporting matrix): gcd over edges of level(u) + 1 - level(v) where levels
/// come from a BFS tree. BFS guarantees level(v) <= level(u) + 1, so the
/// increments are nonnegative.
fn component_period(
    k: &TransferMatrix,
    cells: &[usize],
    tol_sparse: f64,
) -> (usize, Vec<usize>) {
    let mut local = std::collections::HashMap::new();
    for (idx, &c) in cells.iter().enumerate() {
        local.insert(c, idx);
    }
    let mut level = vec![usize::MAX; cells.len()];
    let mut queue = std::collections::VecDeque::new();
    level[0] = 0;
    queue.push_back(0usize);
    while let Some(u) = queue.pop_front() {
        for &(j, v) in &k.rows[cells[u]] {
            if v <= tol_sparse {
                continue;
            }
            if let Some(&w) = local.get(&(j as usize)) {
                if level[w] == usize::MAX {
                    level[w] = level[u] + 1;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut g = 0usize;
    for (u, &cu) in cells.iter().enumerate() {
        for &(j, v) in &k.rows[cu] {
            if v <= tol_sparse {
                continue;
            }
            if let Some(&w) = local.get(&(j as usize)) {
                let d = level[u] + 1 - level[w];
                g = gcd(g, d);
            }
        }
    }
    let g = g.max(1);
    (g, level)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Full ergodic decomposition of a stochastic matrix.
pub fn ergodic_decomposition(k: &TransferMatrix, tol_sparse: f64) -> Result<ErgodicDecomposition> {
    let n = k.n;
    let (comp_of, ncomp) = tarjan_scc(k, tol_sparse);

    // Terminal components: no edge leaving the component.
    let mut terminal = vec![true; ncomp];
    for i in 0..n {
        for &(j, v) in &k.rows[i] {
            if v > tol_sparse && comp_of[j as usize] != comp_of[i] {
                terminal[comp_of[i]] = false;
            }
        }
    }

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); ncomp];
    for i in 0..n {
        members[comp_of[i]].push(i);
    }
    let mut recurrent: Vec<Vec<usize>> = (0..ncomp)
        .filter(|&c| terminal[c])
        .map(|c| members[c].clone())
        .collect();
    recurrent.sort_by_key(|cells| cells[0]);

    let mut components = Vec::with_capacity(recurrent.len());
    for cells in &recurrent {
        let (mut sub, _stochastic) = restrict(k, cells)?;
        renormalize_rows(&mut sub);
        let local = invariant_density(&sub, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
        let scale = n as f64 / cells.len() as f64;
        let mut density = vec![0.0f64; n];
        for (idx, &c) in cells.iter().enumerate() {
            density[c] = local[idx] * scale;
        }
        let (period, levels) = component_period(k, cells, tol_sparse);
        let mut cyclic_classes = vec![Vec::new(); period];
        for (idx, &c) in cells.iter().enumerate() {
            cyclic_classes[levels[idx] % period].push(c);
        }
        for class in &mut cyclic_classes {
            class.sort_unstable();
        }
        components.push(ErgodicComponent { support: cells.clone(), density, period, cyclic_classes });
    }

    let mut is_recurrent = vec![false; n];
    let mut comp_index = vec![usize::MAX; n];
    for (ci, c) in components.iter().enumerate() {
        for &cell in &c.support {
            is_recurrent[cell] = true;
            comp_index[cell] = ci;
        }
    }
    let transient_cells: Vec<usize> = (0..n).filter(|&i| !is_recurrent[i]).collect();

    // Absorption: push each transient basis density through K until the mass
    // still on transient cells is negligible, then read off per-component
    // mass. Row-independent, so parallel and deterministic.
    let r = components.len();
    let absorption: Result<Vec<Vec<f64>>> = transient_cells
        .par_iter()
        .map(|&i| {
            let mut u = vec![0.0f64; n];
            u[i] = 1.0;
            let mut guard = 0usize;
            loop {
                let trans_mass: f64 = transient_cells.iter().map(|&t| u[t]).sum();
                if trans_mass < tol_sparse || guard >= 200_000 {
                    break;
                }
                u = apply(k, &u)?;
                guard += 1;
            }
            let mut w = vec![0.0f64; r];
            for (cell, &mass) in u.iter().enumerate() {
                if comp_index[cell] != usize::MAX {
                    w[comp_index[cell]] += mass;
                }
            }
            let total: f64 = w.iter().sum();
            if total > 0.0 {
                for wi in &mut w {
                    *wi /= total;
                }
            }
            Ok(w)
        })
        .collect();
    let absorption = absorption?;

    let support_union: Vec<usize> = (0..n).filter(|&i| is_recurrent[i]).collect();
    let horizon = (2 * n).max(100);
    let maximal_support_reached = match maximal_support_check(k, &support_union, horizon) {
        Ok((_, verdict)) => verdict,
        Err(_) => false,
    };

    Ok(ErgodicDecomposition { components, transient_cells, absorption, maximal_support_reached })
}

/// Limiting component weights of a density: lambda_k(u) = sum_i (u_i/N) w_i[k],
/// with w_i[k] the absorption fraction (indicator of the component for
/// recurrent cells).
pub fn absorption_weights(
    decomp: &ErgodicDecomposition,
    k_n: usize,
    u: &[f64],
) -> Result<Vec<f64>> {
    if u.len() != k_n {
        return Err(TlError::DimensionMismatch { expected: k_n, got: u.len() });
    }
    let r = decomp.components.len();
    let mut lambda = vec![0.0f64; r];
    let nf = k_n as f64;
    for (ci, c) in decomp.components.iter().enumerate() {
        for &cell in &c.support {
            lambda[ci] += u[cell] / nf;
        }
    }
    for (ti, &cell) in decomp.transient_cells.iter().enumerate() {
        for ci in 0..r {
            lambda[ci] += u[cell] / nf * decomp.absorption[ti][ci];
        }
    }
    Ok(lambda)
}

/// Cyclic-class densities and the permutation they realize.
#[derive(Debug, Clone)]
pub struct PeriodicStructure {
    /// One density per (component, cyclic class), flattened in component
    /// order; each has mean 1 over the full grid.
    pub densities: Vec<Vec<f64>>,
    /// (component, class) label per density.
    pub labels: Vec<(usize, usize)>,
    /// rho[idx] = index of the density one matrix step maps idx onto.
    pub rho: Vec<usize>,
}

/// Condition each component's stationary density on its cyclic classes and
/// verify one matrix step permutes them cyclically (within 1e-8).
pub fn periodic_structure(
    k: &TransferMatrix,
    decomp: &ErgodicDecomposition,
) -> Result<PeriodicStructure> {
    let mut densities = Vec::new();
    let mut labels = Vec::new();
    let mut rho = Vec::new();
    let mut base = 0usize;
    for (ci, comp) in decomp.components.iter().enumerate() {
        let d = comp.period;
        for (cl, class) in comp.cyclic_classes.iter().enumerate() {
            // Mass of h on one cyclic class is 1/d; conditioning multiplies by d.
            let mut g = vec![0.0f64; k.n];
            for &cell in class {
                g[cell] = comp.density[cell] * d as f64;
            }
            densities.push(g);
            labels.push((ci, cl));
            rho.push(base + (cl + 1) % d);
        }
        base += d;
    }
    for (idx, g) in densities.iter().enumerate() {
        let image = apply(k, g)?;
        let err = l1_density_distance(&image, &densities[rho[idx]]);
        if err > 1e-8 {
            let (component, class) = labels[idx];
            return Err(TlError::CyclicClassMismatch { component, class, error: err });
        }
    }
    Ok(PeriodicStructure { densities, labels, rho })
}

/// Adjoint-iterated support mass: a_n = (1/N) sum_i (K^n)* 1_S and the
/// verdict that the iterates reached 1 everywhere. The sequence is
/// entrywise nondecreasing when S contains every recurrent support; a drop
/// beyond 1e-10 is reported as numerical breakage.
pub fn maximal_support_check(
    k: &TransferMatrix,
    support: &[usize],
    n_max: usize,
) -> Result<(Vec<f64>, bool)> {
    let mut g = vec![0.0f64; k.n];
    for &c in support {
        g[c] = 1.0;
    }
    let mut a = Vec::with_capacity(n_max + 1);
    a.push(g.iter().sum::<f64>() / k.n as f64);
    let mut verdict = g.iter().all(|&x| x > 1.0 - 1e-8);
    for step in 1..=n_max {
        if verdict {
            break;
        }
        let next = apply_adjoint(k, &g)?;
        let mut worst_drop = 0.0f64;
        for (old, new) in g.iter().zip(&next) {
            worst_drop = worst_drop.max(old - new);
        }
        if worst_drop > 1e-10 {
            return Err(TlError::MonotonicityViolation { step, drop: worst_drop });
        }
        g = next;
        a.push(g.iter().sum::<f64>() / k.n as f64);
        verdict = g.iter().all(|&x| x > 1.0 - 1e-8);
    }
    Ok((a, verdict))
}

// ---------------------------------------------------------------------------
// Dense nonsymmetric eigenvalue moduli: Hessenberg reduction by stabilized
// elementary similarity transforms, then the shifted double QR sweep.

/// Reduce a dense matrix to upper Hessenberg form in place.
fn hessenberg(a: &mut [Vec<f64>]) {
    let n = a.len();
    for m in 1..n.saturating_sub(1) {
        // Pivot: largest entry in column m-1 at or below row m.
        let mut x = 0.0f64;
        let mut piv = m;
        for i in m..n {
            if a[i][m - 1].abs() > x.abs() {
                x = a[i][m - 1];
                piv = i;
            }
        }
        if piv != m {
            for j in (m - 1)..n {
                let tmp = a[piv][j];
                a[piv][j] = a[m][j];
                a[m][j] = tmp;
            }
            for row in a.iter_mut() {
                row.swap(piv, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = 0.0;
                    for j in m..n {
                        let t = y * a[m][j];
                        a[i][j] -= t;
                    }
                    for r in 0..n {
                        let t = y * a[r][i];
                        a[r][m] += t;
                    }
                }
            }
        }
    }
    // Entries below the subdiagonal are algebraically zero at this point.
    for i in 2..n {
        for j in 0..(i - 1) {
            a[i][j] = 0.0;
        }
    }
}

fn sign_of(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

/// Eigenvalues of an upper Hessenberg matrix by the implicit double-shift QR
/// iteration. Returns (re, im) pairs; the matrix is destroyed.
fn hqr(a: &mut [Vec<f64>]) -> Result<Vec<(f64, f64)>> {
    let n = a.len();
    let mut wr = vec![0.0f64; n];
    let mut wi = vec![0.0f64; n];
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![(a[0][0], 0.0)]);
    }
    let mut anorm = 0.0f64;
    for i in 0..n {
        for j in i.saturating_sub(1)..n {
            anorm += a[i][j].abs();
        }
    }
    let eps = f64::EPSILON;
    let mut nn: isize = n as isize - 1;
    let mut t = 0.0f64;
    while nn >= 0 {
        let mut its = 0usize;
        loop {
            let nnu = nn as usize;
            // Find a negligible subdiagonal element.
            let mut l = nnu;
            while l >= 1 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() <= eps * s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            let mut x = a[nnu][nnu];
            if l == nnu {
                wr[nnu] = x + t;
                wi[nnu] = 0.0;
                nn -= 1;
                break;
            }
            let mut y = a[nnu - 1][nnu - 1];
            let mut w = a[nnu][nnu - 1] * a[nnu - 1][nnu];
            if l == nnu - 1 {
                let p = 0.5 * (y - x);
                let q = p * p + w;
                let z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    let z = p + sign_of(z, p);
                    wr[nnu - 1] = x + z;
                    wr[nnu] = wr[nnu - 1];
                    if z != 0.0 {
                        wr[nnu] = x - w / z;
                    }
                    wi[nnu - 1] = 0.0;
                    wi[nnu] = 0.0;
                } else {
                    wr[nnu - 1] = x + p;
                    wr[nnu] = x + p;
                    wi[nnu] = z;
                    wi[nnu - 1] = -z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(TlError::NoConvergence { iterations: its, residual: a[nnu][nnu - 1].abs() });
            }
            if its == 10 || its == 20 || its == 30 || its == 40 || its == 50 {
                // Exceptional shift.
                t += x;
                for i in 0..=nnu {
                    a[i][i] -= x;
                }
                let s = a[nnu][nnu - 1].abs() + a[nnu - 1][nnu - 2].abs();
                y = 0.75 * s;
                x = y;
                w = -0.4375 * s * s;
            }
            its += 1;
            // Look for two consecutive small subdiagonal elements.
            let mut m = nnu - 2;
            #[allow(unused_assignments)]
            let (mut p, mut q, mut r) = (0.0f64, 0.0f64, 0.0f64);
            loop {
                let z = a[m][m];
                let rr = x - z;
                let ss = y - z;
                p = (rr * ss - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - rr - ss;
                r = a[m + 2][m + 1];
                let scale = p.abs() + q.abs() + r.abs();
                p /= scale;
                q /= scale;
                r /= scale;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u <= eps * v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nnu {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            // Double QR step on rows l..nn, columns m..nn.
            for kk in m..nnu {
                if kk != m {
                    p = a[kk][kk - 1];
                    q = a[kk + 1][kk - 1];
                    r = 0.0;
                    if kk != nnu - 1 {
                        r = a[kk + 2][kk - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign_of((p * p + q * q + r * r).sqrt(), p);
                if s == 0.0 {
                    continue;
                }
                if kk == m {
                    if l != m {
                        a[kk][kk - 1] = -a[kk][kk - 1];
                    }
                } else {
                    a[kk][kk - 1] = -s * x;
                }
                p += s;
                x = p / s;
                y = q / s;
                let z = r / s;
                q /= p;
                r /= p;
                for j in kk..=nnu {
                    let mut pp = a[kk][j] + q * a[kk + 1][j];
                    if kk != nnu - 1 {
                        pp += r * a[kk + 2][j];
                        a[kk + 2][j] -= pp * z;
                    }
                    a[kk + 1][j] -= pp * y;
                    a[kk][j] -= pp * x;
                }
                let mmin = nnu.min(kk + 3);
                for i in l..=mmin {
                    let mut pp = x * a[i][kk] + y * a[i][kk + 1];
                    if kk != nnu - 1 {
                        pp += z * a[i][kk + 2];
                        a[i][kk + 2] -= pp * r;
                    }
                    a[i][kk + 1] -= pp * q;
                    a[i][kk] -= pp;
                }
            }
        }
    }
    Ok(wr.into_iter().zip(wi).collect())
}

/// Eigenvalue moduli of a dense matrix, descending; the input is destroyed.
pub fn eigen_moduli_dense(a: &mut Vec<Vec<f64>>) -> Result<Vec<f64>> {
    hessenberg(a);
    let eig = hqr(a)?;
    let mut moduli: Vec<f64> = eig.iter().map(|&(re, im)| (re * re + im * im).sqrt()).collect();
    moduli.sort_by(|x, y| y.partial_cmp(x).unwrap());
    Ok(moduli)
}

/// Largest size handled by the dense eigensolver inside [`spectral_gap`].
pub const DENSE_EIG_LIMIT: usize = 512;

fn orthonormalize(v: &mut [Vec<f64>]) {
    let m = v.len();
    for c in 0..m {
        for prev in 0..c {
            let dot: f64 = v[c].iter().zip(&v[prev]).map(|(a, b)| a * b).sum();
            let (head, tail) = v.split_at_mut(c);
            for (x, y) in tail[0].iter_mut().zip(&head[prev]) {
                *x -= dot * y;
            }
        }
        let norm: f64 = v[c].iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            for x in &mut v[c] {
                *x /= norm;
            }
        }
    }
}

/// Top-k eigenvalue moduli of K, descending. Dense solve up to
/// [`DENSE_EIG_LIMIT`]; orthogonal subspace iteration with a small projected
/// eigensolve above.
pub fn spectral_gap(k: &TransferMatrix, k_top: usize) -> Result<Vec<f64>> {
    let k_top = k_top.max(2).min(k.n);
    if k.n <= DENSE_EIG_LIMIT {
        let mut dense = k.to_dense();
        let moduli = eigen_moduli_dense(&mut dense)?;
        return Ok(moduli.into_iter().take(k_top).collect());
    }
    // Subspace iteration on columns (adjoint action has the same spectrum).
    let m = (2 * k_top).max(8).min(k.n);
    let mut v: Vec<Vec<f64>> = (0..m)
        .map(|c| {
            let mut s = crate::rng::Stream::new(0x5eed_5afe, c as u64);
            (0..k.n).map(|_| s.next_f64() - 0.5).collect()
        })
        .collect();
    // Seed the dominant direction explicitly.
    for x in &mut v[0] {
        *x = 1.0;
    }
    orthonormalize(&mut v);
    let mut last: Vec<f64> = Vec::new();
    let mut stable = 0usize;
    let max_iter = 5000usize;
    let mut residual = f64::INFINITY;
    for _ in 0..max_iter {
        let w: Result<Vec<Vec<f64>>> = v.par_iter().map(|col| apply_adjoint(k, col)).collect();
        let w = w?;
        // Projected matrix H = V^T K V before replacing V.
        let mut h = vec![vec![0.0f64; m]; m];
        for (i, vi) in v.iter().enumerate() {
            for (j, wj) in w.iter().enumerate() {
                h[i][j] = vi.iter().zip(wj).map(|(a, b)| a * b).sum();
            }
        }
        let moduli = eigen_moduli_dense(&mut h)?;
        let top: Vec<f64> = moduli.into_iter().take(k_top).collect();
        if !last.is_empty() {
            residual = top
                .iter()
                .zip(&last)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            if residual < 1e-12 {
                stable += 1;
                if stable >= 3 {
                    return Ok(top);
                }
            } else {
                stable = 0;
            }
        }
        last = top;
        v = w;
        orthonormalize(&mut v);
    }
    Err(TlError::NoConvergence { iterations: max_iter, residual })
}
