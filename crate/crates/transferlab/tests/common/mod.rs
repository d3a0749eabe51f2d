//! Shared test oracles: an exact rational-arithmetic ergodic decomposition
//! for small dense stochastic matrices, plus a deterministic generator of
//! dyadic random stochastic matrices (entries k/16, so the f64 form is exact
//! and the float code path sees literally the same matrix the oracle does).

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use transferlab::rng::Stream;

pub struct ExactComponent {
    pub support: Vec<usize>,
    /// Stationary density embedded on the full grid, mean 1 over all cells.
    pub density: Vec<f64>,
    pub period: usize,
}

pub struct ExactDecomp {
    pub components: Vec<ExactComponent>,
    pub transient: Vec<usize>,
    /// Per transient cell (aligned with `transient`), absorption mass per
    /// component (aligned with `components`).
    pub absorption: Vec<Vec<f64>>,
}

fn rational_from_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite entry")
}

/// Boolean reachability closure (Floyd-Warshall).
fn reachability(adj: &[Vec<bool>]) -> Vec<Vec<bool>> {
    let n = adj.len();
    let mut r = adj.to_vec();
    for i in 0..n {
        r[i][i] = true;
    }
    for k in 0..n {
        for i in 0..n {
            if r[i][k] {
                for j in 0..n {
                    if r[k][j] {
                        r[i][j] = true;
                    }
                }
            }
        }
    }
    r
}

/// Communicating classes as sorted cell lists, via mutual reachability.
fn classes(reach: &[Vec<bool>]) -> Vec<Vec<usize>> {
    let n = reach.len();
    let mut seen = vec![false; n];
    let mut out = Vec::new();
    for i in 0..n {
        if seen[i] {
            continue;
        }
        let class: Vec<usize> =
            (0..n).filter(|&j| reach[i][j] && reach[j][i]).collect();
        for &j in &class {
            seen[j] = true;
        }
        out.push(class);
    }
    out
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Period of an irreducible class: gcd over in-class edges (i -> j) of
/// level(i) + 1 - level(j), levels from a BFS inside the class.
fn class_period(class: &[usize], adj: &[Vec<bool>]) -> usize {
    let root = class[0];
    let n = adj.len();
    let mut level = vec![usize::MAX; n];
    level[root] = 0;
    let mut queue = std::collections::VecDeque::from([root]);
    let in_class = {
        let mut m = vec![false; n];
        for &c in class {
            m[c] = true;
        }
        m
    };
    while let Some(i) = queue.pop_front() {
        for j in 0..n {
            if adj[i][j] && in_class[j] && level[j] == usize::MAX {
                level[j] = level[i] + 1;
                queue.push_back(j);
            }
        }
    }
    let mut g = 0usize;
    for &i in class {
        for &j in class {
            if adj[i][j] {
                let diff = (level[i] as i64 + 1 - level[j] as i64).unsigned_abs() as usize;
                g = gcd(g, diff);
            }
        }
    }
    g.max(1)
}

/// Exact linear solve A x = b over rationals (Gaussian elimination with
/// nonzero pivoting); A square and invertible by construction here.
fn solve(mut a: Vec<Vec<BigRational>>, mut b: Vec<BigRational>) -> Vec<BigRational> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r][col].is_zero())
            .expect("singular system in exact oracle");
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for j in col..n {
            a[col][j] = &a[col][j] / &p;
        }
        b[col] = &b[col] / &p;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in col..n {
                    a[r][j] = &a[r][j] - &f * &a[col][j];
                }
                b[r] = &b[r] - &f * &b[col];
            }
        }
    }
    b
}

/// Stationary distribution of an irreducible class: solve pi (P - I) = 0 with
/// the normalization row sum(pi) = 1 replacing the last equation.
fn stationary(class: &[usize], p: &[Vec<BigRational>]) -> Vec<BigRational> {
    let m = class.len();
    // Transposed system: (P^T - I) pi = 0, last row replaced by ones = 1.
    let mut a = vec![vec![BigRational::zero(); m]; m];
    for (ri, &i) in class.iter().enumerate() {
        for (ci, &j) in class.iter().enumerate() {
            // equation ri: sum_j pi_j P[j][i] - pi_i = 0.
            a[ri][ci] = p[j][i].clone();
        }
        a[ri][ri] -= BigRational::one();
    }
    let mut b = vec![BigRational::zero(); m];
    for v in a[m - 1].iter_mut() {
        *v = BigRational::one();
    }
    b[m - 1] = BigRational::one();
    solve(a, b)
}

/// Exact ergodic decomposition of a row-stochastic matrix given as f64 rows
/// whose entries are exactly representable (e.g. dyadic); all arithmetic is
/// rational, only the final densities are converted back.
pub fn exact_decomposition(rows: &[Vec<f64>]) -> ExactDecomp {
    let n = rows.len();
    let p: Vec<Vec<BigRational>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| rational_from_f64(x)).collect())
        .collect();
    for (i, row) in p.iter().enumerate() {
        let s: BigRational = row.iter().cloned().sum();
        assert!(
            (s - BigRational::one()).abs()
                < BigRational::new(BigInt::from(1), BigInt::from(1_000_000u64)),
            "oracle input row {i} not stochastic"
        );
    }
    let adj: Vec<Vec<bool>> = rows
        .iter()
        .map(|r| r.iter().map(|&x| x != 0.0).collect())
        .collect();
    let reach = reachability(&adj);
    let mut comps = Vec::new();
    let mut transient = Vec::new();
    for class in classes(&reach) {
        let closed = class
            .iter()
            .all(|&i| (0..n).all(|j| !adj[i][j] || class.contains(&j)));
        if closed {
            comps.push(class);
        } else {
            transient.extend(class);
        }
    }
    comps.sort_by_key(|c| c[0]);
    transient.sort_unstable();

    let components: Vec<ExactComponent> = comps
        .iter()
        .map(|class| {
            let pi = stationary(class, &p);
            let mut density = vec![0.0f64; n];
            for (ci, &cell) in class.iter().enumerate() {
                let d = &pi[ci] * BigRational::from_integer(BigInt::from(n));
                density[cell] = d.to_f64().unwrap();
            }
            ExactComponent {
                support: class.clone(),
                density,
                period: class_period(class, &adj),
            }
        })
        .collect();

    // Absorption: (I - Q) B = R over the transient block.
    let t = transient.len();
    let absorption = if t == 0 {
        Vec::new()
    } else {
        let mut a = vec![vec![BigRational::zero(); t]; t];
        for (ri, &i) in transient.iter().enumerate() {
            for (ci, &j) in transient.iter().enumerate() {
                a[ri][ci] = -p[i][j].clone();
            }
            a[ri][ri] += BigRational::one();
        }
        let mut out = vec![vec![0.0f64; comps.len()]; t];
        for (k, class) in comps.iter().enumerate() {
            let b: Vec<BigRational> = transient
                .iter()
                .map(|&i| class.iter().map(|&j| p[i][j].clone()).sum())
                .collect();
            let x = solve(a.clone(), b);
            for (ri, v) in x.into_iter().enumerate() {
                out[ri][k] = v.to_f64().unwrap();
            }
        }
        out
    };

    ExactDecomp { components, transient, absorption }
}

/// Deterministic random row-stochastic matrix with dyadic entries (k/16).
/// Mixes plain random rows with shift rows (periodic structure) and
/// self-loop rows (absorbing structure) so the corpus exercises multiple
/// components, periods and transient chains.
pub fn random_dyadic_stochastic(seed: u64, n: usize) -> Vec<Vec<f64>> {
    let mut st = Stream::new(seed, 7171);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let style = st.next_word() % 10;
        let mut row = vec![0.0f64; n];
        match style {
            0 => row[(i + 1) % n] = 1.0,
            1 => row[i] = 1.0,
            _ => {
                let k_cols = 1 + (st.next_word() as usize) % n.min(4);
                let cols: Vec<usize> =
                    (0..k_cols).map(|_| (st.next_word() as usize) % n).collect();
                let mut units = vec![0u32; cols.len()];
                for _ in 0..16 {
                    units[(st.next_word() as usize) % cols.len()] += 1;
                }
                for (c, u) in cols.iter().zip(units) {
                    row[*c] += u as f64 / 16.0;
                }
            }
        }
        rows.push(row);
    }
    rows
}
