//! Independent reference implementations used by the integration tests.
//!
//! None of these share code with the library: they are deliberately naive so
//! that agreement is evidence of correctness rather than of shared bugs.

#![allow(
    dead_code,
    clippy::type_complexity,
    clippy::too_many_arguments,
    clippy::needless_range_loop
)]

use nalgebra::DMatrix;
use rand::Rng;

/// Euclidean distance, summed in coordinate order.
pub fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Persistence of the full Vietoris-Rips complex (up to triangles) by
/// left-to-right reduction of the complete Z/2 boundary matrix.
///
/// Returns sorted (birth, death) multisets for H0 and H1. H0 keeps every bar,
/// H1 drops zero-length bars; unpaired classes die at infinity.
pub fn brute_force_rips(points: &[Vec<f64>]) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let n = points.len();
    let d: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| dist(&points[i], &points[j])).collect())
        .collect();

    // (value, dimension, vertices)
    let mut simplices: Vec<(f64, usize, Vec<usize>)> = Vec::new();
    for i in 0..n {
        simplices.push((0.0, 0, vec![i]));
    }
    for i in 0..n {
        for j in (i + 1)..n {
            simplices.push((d[i][j], 1, vec![i, j]));
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            for k in (j + 1)..n {
                let v = d[i][j].max(d[i][k]).max(d[j][k]);
                simplices.push((v, 2, vec![i, j, k]));
            }
        }
    }
    simplices.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let index_of = |vs: &[usize]| simplices.iter().position(|s| s.2 == vs).unwrap();

    let m = simplices.len();
    let mut columns: Vec<Vec<bool>> = Vec::with_capacity(m);
    for (_, dim, vs) in &simplices {
        let mut col = vec![false; m];
        if *dim > 0 {
            for skip in 0..vs.len() {
                let face: Vec<usize> = vs
                    .iter()
                    .enumerate()
                    .filter(|(p, _)| *p != skip)
                    .map(|(_, &v)| v)
                    .collect();
                col[index_of(&face)] = true;
            }
        }
        columns.push(col);
    }

    let low = |col: &[bool]| col.iter().rposition(|&b| b);
    let mut low_owner: Vec<Option<usize>> = vec![None; m];
    for j in 0..m {
        while let Some(l) = low(&columns[j]) {
            match low_owner[l] {
                Some(k) => {
                    let other = columns[k].clone();
                    for (a, b) in columns[j].iter_mut().zip(other) {
                        *a ^= b;
                    }
                }
                None => {
                    low_owner[l] = Some(j);
                    break;
                }
            }
        }
    }

    let mut h0 = Vec::new();
    let mut h1 = Vec::new();
    for (i, (value, dim, _)) in simplices.iter().enumerate() {
        let zero_column = low(&columns[i]).is_none();
        if !zero_column {
            continue;
        }
        let death = low_owner[i].map_or(f64::INFINITY, |j| simplices[j].0);
        match dim {
            0 => h0.push((*value, death)),
            1 if death > *value => h1.push((*value, death)),
            _ => {}
        }
    }
    h0.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    h1.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    (h0, h1)
}

/// Edge weights of a minimum spanning tree (Prim, dense), sorted.
pub fn mst_weights(points: &[Vec<f64>]) -> Vec<f64> {
    let n = points.len();
    if n == 0 {
        return Vec::new();
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    best[0] = 0.0;
    let mut weights = Vec::with_capacity(n - 1);
    for step in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].total_cmp(&best[b]))
            .unwrap();
        in_tree[u] = true;
        if step > 0 {
            weights.push(best[u]);
        }
        for v in 0..n {
            if !in_tree[v] {
                best[v] = best[v].min(dist(&points[u], &points[v]));
            }
        }
    }
    weights.sort_by(f64::total_cmp);
    weights
}

pub fn random_cloud(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Points on a small integer grid, which produces many tied distances.
pub fn grid_cloud(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.random_range(0..3) as f64).collect())
        .collect()
}

/// Box-and-hyperplane constrained dual SVM solved by accelerated projected
/// gradient: maximize 1ᵀα − ½αᵀQα, 0 ≤ α ≤ C, yᵀα = 0, Q_ij = y_i y_j K_ij.
pub fn qp_oracle(k: &DMatrix<f64>, y: &[f64], c: f64, steps: usize) -> Vec<f64> {
    let n = y.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * k[(i, j)]);
    let lipschitz = q.clone().symmetric_eigenvalues().max().max(1e-12);
    let step = 1.0 / lipschitz;
    let mut alpha = vec![0.0; n];
    let mut z = alpha.clone();
    let mut t = 1.0_f64;
    for _ in 0..steps {
        let grad: Vec<f64> = (0..n)
            .map(|i| 1.0 - (0..n).map(|j| q[(i, j)] * z[j]).sum::<f64>())
            .collect();
        let v: Vec<f64> = (0..n).map(|i| z[i] + step * grad[i]).collect();
        let next = project_box_hyperplane(&v, y, c);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let momentum = (t - 1.0) / t_next;
        z = (0..n)
            .map(|i| next[i] + momentum * (next[i] - alpha[i]))
            .collect();
        alpha = next;
        t = t_next;
    }
    alpha
}

/// Euclidean projection onto {0 ≤ α ≤ C, yᵀα = 0} by bisection on the
/// multiplier of the equality constraint.
pub fn project_box_hyperplane(v: &[f64], y: &[f64], c: f64) -> Vec<f64> {
    let at = |nu: f64| -> Vec<f64> {
        v.iter()
            .zip(y)
            .map(|(vi, yi)| (vi - nu * yi).clamp(0.0, c))
            .collect()
    };
    let balance = |a: &[f64]| a.iter().zip(y).map(|(a, y)| a * y).sum::<f64>();
    let bound = v.iter().map(|x| x.abs()).fold(0.0, f64::max) + c + 1.0;
    let (mut lo, mut hi) = (-bound, bound);
    // balance is nonincreasing in nu
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if balance(&at(mid)) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    at(0.5 * (lo + hi))
}

pub fn dual_value(k: &DMatrix<f64>, y: &[f64], alpha: &[f64]) -> f64 {
    let n = y.len();
    let mut quad = 0.0;
    for i in 0..n {
        for j in 0..n {
            quad += alpha[i] * alpha[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Maximal KKT violation of a dual SVM solution, computed from scratch:
/// the gap between the largest −y_t∇_t over the "up" set and the smallest
/// over the "low" set.
pub fn svm_kkt_gap(k: &DMatrix<f64>, y: &[f64], alpha: &[f64], c: f64) -> f64 {
    let n = y.len();
    let mut up = f64::NEG_INFINITY;
    let mut low = f64::INFINITY;
    for t in 0..n {
        let g = (0..n)
            .map(|j| y[t] * y[j] * k[(t, j)] * alpha[j])
            .sum::<f64>()
            - 1.0;
        let v = -y[t] * g;
        let eps = 1e-12 * c;
        let (above_zero, below_c) = (alpha[t] > eps, alpha[t] < c - eps);
        if (y[t] > 0.0 && below_c) || (y[t] < 0.0 && above_zero) {
            up = up.max(v);
        }
        if (y[t] > 0.0 && above_zero) || (y[t] < 0.0 && below_c) {
            low = low.min(v);
        }
    }
    (up - low).max(0.0)
}

/// Random PSD kernel: Gram matrix of `n` random vectors in R^`rank`.
pub fn random_psd(rng: &mut impl Rng, n: usize, rank: usize) -> DMatrix<f64> {
    let x = DMatrix::from_fn(n, rank, |_, _| rng.random_range(-1.0..1.0));
    &x * x.transpose()
}

/// Random ±1 labels with both classes present.
pub fn random_labels(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    loop {
        let y: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        if y.contains(&1.0) && y.contains(&-1.0) {
            return y;
        }
    }
}

/// Brute-force bottleneck distance between two finite diagrams: tries every
/// matching over points plus diagonal projections, so only for tiny inputs.
pub fn bottleneck(a: &[(f64, f64)], b: &[(f64, f64)]) -> f64 {
    let to_diag = |p: &(f64, f64)| 0.5 * (p.1 - p.0);
    let linf = |p: &(f64, f64), q: &(f64, f64)| (p.0 - q.0).abs().max((p.1 - q.1).abs());
    // slots: each a-point matches a b-point or the diagonal; unmatched b-points go to the diagonal
    fn search(
        i: usize,
        a: &[(f64, f64)],
        b: &[(f64, f64)],
        used: &mut Vec<bool>,
        cost: f64,
        best: &mut f64,
        linf: &dyn Fn(&(f64, f64), &(f64, f64)) -> f64,
        to_diag: &dyn Fn(&(f64, f64)) -> f64,
    ) {
        if cost >= *best {
            return;
        }
        if i == a.len() {
            let rest = b
                .iter()
                .zip(used.iter())
                .filter(|(_, &u)| !u)
                .map(|(q, _)| to_diag(q))
                .fold(cost, f64::max);
            *best = best.min(rest);
            return;
        }
        search(
            i + 1,
            a,
            b,
            used,
            cost.max(to_diag(&a[i])),
            best,
            linf,
            to_diag,
        );
        for j in 0..b.len() {
            if !used[j] {
                used[j] = true;
                search(
                    i + 1,
                    a,
                    b,
                    used,
                    cost.max(linf(&a[i], &b[j])),
                    best,
                    linf,
                    to_diag,
                );
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    search(
        0,
        a,
        b,
        &mut vec![false; b.len()],
        0.0,
        &mut best,
        &linf,
        &to_diag,
    );
    best
}

/// Minimum eigenvalue ≥ −tol·max eigenvalue.
pub fn psd_ok(m: &DMatrix<f64>, tol: f64) -> bool {
    let eig = m.clone().symmetric_eigenvalues();
    let max = eig.max();
    eig.min() >= -tol * max.abs().max(f64::MIN_POSITIVE)
}
