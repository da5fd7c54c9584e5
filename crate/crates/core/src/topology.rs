//! Delay embeddings, Vietoris-Rips persistence and the persistence scale-space
//! kernel.
//!
//! Persistence is computed on the Rips filtration truncated at dimension 2:
//! H0 with a union-find pass over the sorted edges, H1 with a reduction of the
//! coboundary matrix of the edges (persistent cohomology yields the same
//! diagrams as homology). Edges that kill an H0 class cannot carry H1 and are
//! skipped.
//!
//! Simplices are totally ordered by filtration value, then dimension, then the
//! lexicographic order of their sorted vertex lists.

use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashMap};
use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{Method, SimilarityMatrix};

/// Points in R^m, e.g. a delay embedding of one series.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Vec<f64>>,
    dim: usize,
}

impl PointCloud {
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        let dim = points.first().map_or(0, Vec::len);
        if points.iter().any(|p| p.len() != dim) {
            return Err(Error::Shape(
                "point cloud has points of different dimension".into(),
            ));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain(
                "point cloud has non-finite coordinates".into(),
            ));
        }
        Ok(Self { points, dim })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Euclidean distance matrix.
    pub fn distances(&self) -> Vec<Vec<f64>> {
        let n = self.len();
        let mut d = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in (i + 1)..n {
                let v = self.points[i]
                    .iter()
                    .zip(&self.points[j])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                d[i][j] = v;
                d[j][i] = v;
            }
        }
        d
    }
}

/// Points `(x_t, x_{t+τ}, …, x_{t+(m−1)τ})` for every admissible `t`.
pub fn delay_embed(series: &[f64], m: usize, tau: usize) -> Result<PointCloud> {
    if m == 0 || tau == 0 {
        return Err(Error::Domain(format!(
            "embedding dimension and delay must be at least 1 (m={m}, tau={tau})"
        )));
    }
    let span = (m - 1) * tau;
    if series.len() <= span {
        return Err(Error::Domain(format!(
            "series too short for embedding: {} samples, need at least {}",
            series.len(),
            span + 1
        )));
    }
    let points = (0..series.len() - span)
        .map(|t| (0..m).map(|c| series[t + c * tau]).collect())
        .collect();
    PointCloud::new(points)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePair {
    pub birth: f64,
    pub death: f64,
}

impl PersistencePair {
    pub fn new(birth: f64, death: f64) -> Self {
        Self { birth, death }
    }

    pub fn is_finite(&self) -> bool {
        self.death.is_finite()
    }

    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }
}

/// Birth/death pairs of one homology dimension.
///
/// H0 diagrams keep every bar (one per point, zero-length bars included). H1
/// diagrams omit zero-length pairs. Classes alive at the truncation scale have
/// `death = +∞`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub dimension: usize,
    pub pairs: Vec<PersistencePair>,
}

/// What to do with infinite bars before evaluating the diagram kernel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InfiniteBars {
    #[default]
    Drop,
    /// Replace infinite deaths by the truncation scale.
    Cap,
}

impl PersistenceDiagram {
    pub fn new(dimension: usize, pairs: Vec<PersistencePair>) -> Self {
        Self { dimension, pairs }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn finite_pairs(&self) -> impl Iterator<Item = &PersistencePair> {
        self.pairs.iter().filter(|p| p.is_finite())
    }

    /// Copy with infinite bars dropped or capped at `cap`.
    pub fn to_finite(&self, policy: InfiniteBars, cap: f64) -> PersistenceDiagram {
        let pairs = self
            .pairs
            .iter()
            .filter_map(|p| match (p.is_finite(), policy) {
                (true, _) => Some(*p),
                (false, InfiniteBars::Drop) => None,
                (false, InfiniteBars::Cap) => Some(PersistencePair::new(p.birth, cap.max(p.birth))),
            })
            .collect();
        PersistenceDiagram::new(self.dimension, pairs)
    }

    /// Pairs sorted by (birth, death); convenient for comparisons.
    pub fn sorted(&self) -> Vec<(f64, f64)> {
        let mut v: Vec<(f64, f64)> = self.pairs.iter().map(|p| (p.birth, p.death)).collect();
        v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        v
    }
}

/// CSV with header `dimension,birth,death`; infinite deaths are written as `inf`.
pub fn diagrams_to_csv(diagrams: &[PersistenceDiagram]) -> String {
    let mut out = String::from("dimension,birth,death\n");
    for d in diagrams {
        for p in &d.pairs {
            let death = if p.death.is_finite() {
                p.death.to_string()
            } else {
                "inf".to_string()
            };
            let _ = writeln!(out, "{},{},{}", d.dimension, p.birth, death);
        }
    }
    out
}

/// Truncation radius of the filtration.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxScale {
    /// Largest pairwise distance, i.e. no truncation.
    #[default]
    Auto,
    Fixed(f64),
}

impl MaxScale {
    pub fn resolve(self, distances: &[Vec<f64>]) -> f64 {
        match self {
            MaxScale::Fixed(v) => v,
            MaxScale::Auto => distances
                .iter()
                .flat_map(|r| r.iter().copied())
                .fold(0.0, f64::max),
        }
    }
}

/// One simplex of a Rips filtration.
#[derive(Debug, Clone, PartialEq)]
pub struct Simplex {
    pub vertices: Vec<usize>,
    pub value: f64,
}

/// Explicit Rips filtration up to dimension 2. Only practical for small
/// clouds; [`rips_persistence`] never materializes it.
#[derive(Debug, Clone)]
pub struct RipsFiltration {
    pub simplices: Vec<Simplex>,
    pub max_scale: f64,
}

impl RipsFiltration {
    pub fn build(cloud: &PointCloud, max_scale: MaxScale) -> Self {
        let d = cloud.distances();
        let max_scale = max_scale.resolve(&d);
        let n = cloud.len();
        let mut simplices: Vec<Simplex> = (0..n)
            .map(|v| Simplex {
                vertices: vec![v],
                value: 0.0,
            })
            .collect();
        for a in 0..n {
            for b in (a + 1)..n {
                if d[a][b] <= max_scale {
                    simplices.push(Simplex {
                        vertices: vec![a, b],
                        value: d[a][b],
                    });
                }
                for c in (b + 1)..n {
                    let value = d[a][b].max(d[a][c]).max(d[b][c]);
                    if value <= max_scale {
                        simplices.push(Simplex {
                            vertices: vec![a, b, c],
                            value,
                        });
                    }
                }
            }
        }
        simplices.sort_by(|x, y| {
            x.value
                .total_cmp(&y.value)
                .then(x.vertices.len().cmp(&y.vertices.len()))
                .then_with(|| x.vertices.cmp(&y.vertices))
        });
        Self {
            simplices,
            max_scale,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Edge {
    value: f64,
    u: u32,
    v: u32,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tri {
    value: f64,
    v: [u32; 3],
}

impl Eq for Tri {}

impl Ord for Tri {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then(self.v.cmp(&other.v))
    }
}

impl PartialOrd for Tri {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        // keep the smaller root; all births are 0 so the elder rule is a tie
        let (keep, merge) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[merge] = keep;
        true
    }
}

/// Working column over Z/2 kept as a min-heap; equal entries cancel lazily.
#[derive(Default)]
struct WorkingColumn {
    heap: BinaryHeap<Reverse<Tri>>,
}

impl WorkingColumn {
    fn pivot(&mut self) -> Option<Tri> {
        while let Some(Reverse(top)) = self.heap.pop() {
            match self.heap.peek() {
                Some(Reverse(next)) if *next == top => {
                    self.heap.pop();
                }
                _ => {
                    self.heap.push(Reverse(top));
                    return Some(top);
                }
            }
        }
        None
    }
}

/// Sorts `items` and removes entries that occur an even number of times.
fn cancel_pairs(mut items: Vec<usize>) -> Vec<usize> {
    items.sort_unstable();
    let mut out = Vec::with_capacity(items.len());
    for x in items {
        if out.last() == Some(&x) {
            out.pop();
        } else {
            out.push(x);
        }
    }
    out
}

/// Smallest coface of edge `e` in (value, vertices) order.
fn min_coface(d: &[Vec<f64>], e: &Edge, scale: f64) -> Option<Tri> {
    let (u, v) = (e.u as usize, e.v as usize);
    let (du, dv) = (&d[u], &d[v]);
    let mut best: Option<Tri> = None;
    for w in 0..du.len() {
        if w == u || w == v {
            continue;
        }
        let value = e.value.max(du[w]).max(dv[w]);
        if value > scale || best.is_some_and(|b| value > b.value) {
            continue;
        }
        let mut vs = [e.u, e.v, w as u32];
        vs.sort_unstable();
        let t = Tri { value, v: vs };
        if best.is_none_or(|b| t < b) {
            best = Some(t);
        }
    }
    best
}

/// H0 and H1 persistence diagrams of the Rips filtration of `cloud`.
///
/// Returns `[H0, H1]`. With [`MaxScale::Auto`] exactly one H0 class is
/// essential.
pub fn rips_persistence(
    cloud: &PointCloud,
    max_scale: MaxScale,
) -> Result<[PersistenceDiagram; 2]> {
    let n = cloud.len();
    if n == 0 {
        return Err(Error::Domain("persistence of an empty point cloud".into()));
    }
    if n > u32::MAX as usize {
        return Err(Error::Domain("point cloud too large".into()));
    }
    let d = cloud.distances();
    let scale = max_scale.resolve(&d);

    let mut edges = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in (u + 1)..n {
            if d[u][v] <= scale {
                edges.push(Edge {
                    value: d[u][v],
                    u: u as u32,
                    v: v as u32,
                });
            }
        }
    }
    edges.sort_by(|a, b| {
        a.value
            .total_cmp(&b.value)
            .then((a.u, a.v).cmp(&(b.u, b.v)))
    });

    // H0 by union-find; merging edges are cleared from the H1 reduction.
    let mut uf = UnionFind::new(n);
    let mut h0 = Vec::with_capacity(n);
    let mut kills_component = vec![false; edges.len()];
    for (idx, e) in edges.iter().enumerate() {
        if uf.union(e.u as usize, e.v as usize) {
            h0.push(PersistencePair::new(0.0, e.value));
            kills_component[idx] = true;
        }
    }
    let essential = n - h0.len();
    h0.extend(std::iter::repeat_n(
        PersistencePair::new(0.0, f64::INFINITY),
        essential,
    ));

    // H1 by coboundary reduction, edges in decreasing filtration order.
    // Only the combination of edges behind each reduced column is stored;
    // coboundaries are recomputed when a column is added.
    let (dist, all_edges) = (&d, &edges);
    let cofaces = |idx: usize| {
        let e = &all_edges[idx];
        let d = dist;
        let (u, v) = (e.u as usize, e.v as usize);
        (0..n)
            .filter(move |&w| w != u && w != v)
            .filter_map(move |w| {
                let value = e.value.max(d[u][w]).max(d[v][w]);
                if value > scale {
                    return None;
                }
                let mut vs = [u as u32, v as u32, w as u32];
                vs.sort_unstable();
                Some(Tri { value, v: vs })
            })
    };
    let coboundary =
        |idx: usize, work: &mut WorkingColumn| work.heap.extend(cofaces(idx).map(Reverse));
    let mut combos: Vec<Vec<usize>> = Vec::new();
    let mut owner: HashMap<[u32; 3], usize> = HashMap::new();
    let mut h1 = Vec::new();
    for (idx, e) in edges.iter().enumerate().rev() {
        if kills_component[idx] {
            continue;
        }
        // Unreduced column whose pivot is free: pair it without building a heap.
        let first = min_coface(dist, e, scale);
        if let Some(low) = first.filter(|t| !owner.contains_key(&t.v)) {
            if low.value > e.value {
                h1.push(PersistencePair::new(e.value, low.value));
            }
            owner.insert(low.v, combos.len());
            combos.push(vec![idx]);
            continue;
        }
        let mut work = WorkingColumn::default();
        let mut combo = vec![idx];
        coboundary(idx, &mut work);
        let pivot = loop {
            match work.pivot() {
                Some(low) => match owner.get(&low.v) {
                    Some(&j) => {
                        for &k in &combos[j] {
                            coboundary(k, &mut work);
                        }
                        combo.extend_from_slice(&combos[j]);
                    }
                    None => break Some(low),
                },
                None => break None,
            }
        };
        match pivot {
            Some(low) => {
                if low.value > e.value {
                    h1.push(PersistencePair::new(e.value, low.value));
                }
                owner.insert(low.v, combos.len());
                combos.push(cancel_pairs(combo));
            }
            None => h1.push(PersistencePair::new(e.value, f64::INFINITY)),
        }
    }
    h1.sort_by(|a, b| {
        a.birth
            .total_cmp(&b.birth)
            .then(a.death.total_cmp(&b.death))
    });

    Ok([
        PersistenceDiagram::new(0, h0),
        PersistenceDiagram::new(1, h1),
    ])
}

/// Persistence scale-space kernel
/// k_σ(F, G) = 1/(8πσ) Σ_{p∈F, q∈G} [exp(−‖p−q‖²/8σ) − exp(−‖p−q̄‖²/8σ)]
/// where q̄ is q mirrored across the diagonal.
pub fn pssk(f: &PersistenceDiagram, g: &PersistenceDiagram, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Domain(format!(
            "PSSK sigma must be positive, got {sigma}"
        )));
    }
    if f.pairs.iter().chain(&g.pairs).any(|p| !p.is_finite()) {
        return Err(Error::Domain(
            "PSSK requires finite diagrams; drop or cap infinite bars first".into(),
        ));
    }
    let denom = 8.0 * sigma;
    let mut sum = 0.0;
    for p in &f.pairs {
        for q in &g.pairs {
            let db = p.birth - q.birth;
            let dd = p.death - q.death;
            let mb = p.birth - q.death;
            let md = p.death - q.birth;
            sum += (-(db * db + dd * dd) / denom).exp() - (-(mb * mb + md * md) / denom).exp();
        }
    }
    Ok(sum / (std::f64::consts::PI * denom))
}

/// Full Gram matrix of [`pssk`] over a set of finite diagrams.
pub fn pssk_gram(diagrams: &[PersistenceDiagram], sigma: f64) -> Result<DMatrix<f64>> {
    let n = diagrams.len();
    let mut g = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = pssk(&diagrams[i], &diagrams[j], sigma)?;
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    Ok(g)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PersistenceParams {
    /// Embedding dimension.
    pub m: usize,
    /// Delay in samples.
    pub tau: usize,
    pub sigma: f64,
    #[serde(default)]
    pub max_scale: MaxScale,
    #[serde(default)]
    pub infinite_bars: InfiniteBars,
}

impl Default for PersistenceParams {
    fn default() -> Self {
        Self {
            m: 2,
            tau: 3,
            sigma: 0.5,
            max_scale: MaxScale::Auto,
            infinite_bars: InfiniteBars::Drop,
        }
    }
}

/// Finite H1 diagram of the delay embedding of every region (row) of `data`.
pub fn region_diagrams(
    data: &DMatrix<f64>,
    params: &PersistenceParams,
) -> Result<Vec<PersistenceDiagram>> {
    (0..data.nrows())
        .into_par_iter()
        .map(|r| {
            let series: Vec<f64> = data.row(r).iter().copied().collect();
            let cloud = delay_embed(&series, params.m, params.tau)
                .map_err(|e| e.context(format!("region {r}")))?;
            let cap = MaxScale::resolve(params.max_scale, &cloud.distances());
            let [_, h1] = rips_persistence(&cloud, params.max_scale)?;
            Ok(h1.to_finite(params.infinite_bars, cap))
        })
        .collect()
}

/// Region × region PSSK similarity between Betti-1 diagrams, zero diagonal.
pub fn persistence_similarity(
    data: &DMatrix<f64>,
    params: &PersistenceParams,
) -> Result<SimilarityMatrix> {
    let diagrams = region_diagrams(data, params)?;
    let mut values = pssk_gram(&diagrams, params.sigma)?;
    values.fill_diagonal(0.0);
    Ok(SimilarityMatrix::new(values, Method::Persistence))
}
