//! Binary degree-labelled graphs and the Weisfeiler-Lehman and shortest-path
//! graph kernels.

use std::collections::{BTreeMap, HashMap, VecDeque};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::KernelMatrix;
use crate::similarity::SimilarityMatrix;

/// Undirected simple graph whose node labels start as degrees.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledGraph {
    adjacency: Vec<Vec<bool>>,
    neighbors: Vec<Vec<usize>>,
    labels: Vec<u64>,
}

impl LabeledGraph {
    /// Builds a graph from an edge list; node labels are set to degrees.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![vec![false; n]; n];
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::Shape(format!(
                    "edge ({a}, {b}) out of range for {n} nodes"
                )));
            }
            if a == b {
                return Err(Error::Domain(format!("self-loop on node {a}")));
            }
            adjacency[a][b] = true;
            adjacency[b][a] = true;
        }
        Ok(Self::from_adjacency(adjacency))
    }

    fn from_adjacency(adjacency: Vec<Vec<bool>>) -> Self {
        let neighbors: Vec<Vec<usize>> = adjacency
            .iter()
            .map(|row| {
                row.iter()
                    .enumerate()
                    .filter(|(_, &e)| e)
                    .map(|(j, _)| j)
                    .collect()
            })
            .collect();
        let labels = neighbors.iter().map(|nb| nb.len() as u64).collect();
        Self {
            adjacency,
            neighbors,
            labels,
        }
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.neighbors.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adjacency[a][b]
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.neighbors[v]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        (0..self.node_count())
            .flat_map(|a| {
                self.neighbors[a]
                    .iter()
                    .filter(move |&&b| b > a)
                    .map(move |&b| (a, b))
            })
            .collect()
    }

    /// Relabels nodes so that node `perm[v]` of the result is node `v` here.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        if perm.len() != n
            || perm
                .iter()
                .any(|&p| p >= n || std::mem::replace(&mut seen[p], true))
        {
            return Err(Error::Domain("not a permutation".into()));
        }
        let edges: Vec<_> = self
            .edges()
            .into_iter()
            .map(|(a, b)| (perm[a], perm[b]))
            .collect();
        Self::from_edges(n, &edges)
    }
}

/// Keeps edge (i, j) iff i ≠ j and `m(i, j) > threshold`.
pub fn binarize(m: &SimilarityMatrix, threshold: f64) -> Result<LabeledGraph> {
    if !m.normalized {
        return Err(Error::Domain(format!(
            "{} similarity must be normalized to [0, 1] before thresholding",
            m.method
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Domain(format!(
            "threshold must lie in [0, 1], got {threshold}"
        )));
    }
    let k = m.size();
    let adjacency = (0..k)
        .map(|i| (0..k).map(|j| i != j && m.get(i, j) > threshold).collect())
        .collect();
    Ok(LabeledGraph::from_adjacency(adjacency))
}

/// Threshold that keeps (up to ties) the `density` fraction of strongest edges.
pub fn density_threshold(m: &SimilarityMatrix, density: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&density) {
        return Err(Error::Domain(format!(
            "edge density must lie in [0, 1], got {density}"
        )));
    }
    let mut upper = m.upper_triangle();
    upper.sort_by(|a, b| b.total_cmp(a));
    let keep = (density * upper.len() as f64).round() as usize;
    Ok(match keep {
        0 => 1.0,
        k if k >= upper.len() => 0.0,
        k => upper[k],
    })
}

/// Cohort-wide injective compression of WL signatures, one table per iteration.
///
/// Ids are assigned in first-seen order, so the tables depend on the order in
/// which graphs are processed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WlLabeler {
    /// `tables[h - 1]` maps (own label, sorted neighbour labels) to the label at iteration h.
    tables: Vec<Vec<(Vec<u64>, u64)>>,
    #[serde(skip)]
    index: Vec<HashMap<Vec<u64>, u64>>,
}

impl WlLabeler {
    pub fn new() -> Self {
        Self::default()
    }

    fn compress(&mut self, iteration: usize, signature: Vec<u64>) -> u64 {
        while self.index.len() < iteration {
            self.index.push(HashMap::new());
            self.tables.push(Vec::new());
        }
        let idx = &mut self.index[iteration - 1];
        if let Some(&id) = idx.get(&signature) {
            return id;
        }
        let id = idx.len() as u64;
        idx.insert(signature.clone(), id);
        self.tables[iteration - 1].push((signature, id));
        id
    }

    /// Rebuilds lookup indices after deserialization.
    pub fn reindex(&mut self) {
        self.index = self
            .tables
            .iter()
            .map(|t| t.iter().map(|(s, id)| (s.clone(), *id)).collect())
            .collect();
    }

    pub fn depth(&self) -> usize {
        self.tables.len()
    }

    /// Label sequences for every iteration 0..=h of one graph.
    pub fn features(&mut self, g: &LabeledGraph, h: usize) -> WlFeature {
        let mut counts = BTreeMap::new();
        let mut labels = g.labels().to_vec();
        for &l in &labels {
            *counts.entry((0, l)).or_insert(0) += 1;
        }
        for it in 1..=h {
            let next: Vec<u64> = (0..g.node_count())
                .map(|v| {
                    let mut sig = Vec::with_capacity(g.neighbors(v).len() + 1);
                    sig.push(labels[v]);
                    let mut nb: Vec<u64> = g.neighbors(v).iter().map(|&u| labels[u]).collect();
                    nb.sort_unstable();
                    sig.extend(nb);
                    sig
                })
                .collect::<Vec<_>>()
                .into_iter()
                .map(|sig| self.compress(it, sig))
                .collect();
            for &l in &next {
                *counts.entry((it as u32, l)).or_insert(0) += 1;
            }
            labels = next;
        }
        WlFeature { counts, h }
    }
}

/// WL label histogram, keyed by (iteration, label id).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WlFeature {
    pub counts: BTreeMap<(u32, u64), usize>,
    pub h: usize,
}

impl WlFeature {
    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn dot(&self, other: &WlFeature) -> f64 {
        sparse_dot(&self.counts, &other.counts)
    }
}

fn sparse_dot<K: Ord>(a: &BTreeMap<K, usize>, b: &BTreeMap<K, usize>) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .filter_map(|(k, &x)| large.get(k).map(|&y| x * y))
        .sum::<usize>() as f64
}

/// WL features of a single graph with a fresh compression table.
pub fn wl_features(g: &LabeledGraph, h: usize) -> WlFeature {
    WlLabeler::new().features(g, h)
}

/// WL subtree kernel over a list of graphs sharing one compression table.
pub fn wl_kernel(graphs: &[LabeledGraph], h: usize) -> (KernelMatrix, WlLabeler) {
    let mut labeler = WlLabeler::new();
    let feats: Vec<WlFeature> = graphs.iter().map(|g| labeler.features(g, h)).collect();
    let n = feats.len();
    let mut values = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = feats[a].dot(&feats[b]);
            values[(a, b)] = v;
            values[(b, a)] = v;
        }
    }
    (KernelMatrix::new(values, format!("wl(h={h})")), labeler)
}

/// Histogram of (min endpoint label, max endpoint label, hop distance) over
/// connected unordered node pairs.
pub fn shortest_path_features(g: &LabeledGraph) -> BTreeMap<(u64, u64, usize), usize> {
    let n = g.node_count();
    let mut hist = BTreeMap::new();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for s in 0..n {
        dist.fill(usize::MAX);
        dist[s] = 0;
        queue.push_back(s);
        while let Some(v) = queue.pop_front() {
            for &u in g.neighbors(v) {
                if dist[u] == usize::MAX {
                    dist[u] = dist[v] + 1;
                    queue.push_back(u);
                }
            }
        }
        for t in (s + 1)..n {
            if dist[t] != usize::MAX {
                let (a, b) = (g.labels()[s], g.labels()[t]);
                *hist.entry((a.min(b), a.max(b), dist[t])).or_insert(0) += 1;
            }
        }
    }
    hist
}

/// Delta shortest-path kernel.
pub fn sp_kernel(graphs: &[LabeledGraph]) -> KernelMatrix {
    let feats: Vec<_> = graphs.iter().map(shortest_path_features).collect();
    let n = feats.len();
    let mut values = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = sparse_dot(&feats[a], &feats[b]);
            values[(a, b)] = v;
            values[(b, a)] = v;
        }
    }
    KernelMatrix::new(values, "shortest_path")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::similarity::Method;

    fn normalized(values: DMatrix<f64>) -> SimilarityMatrix {
        let mut m = SimilarityMatrix::new(values, Method::Correlation);
        m.normalized = true;
        m
    }

    #[test]
    fn binarize_extremes() {
        let mut v = DMatrix::from_element(4, 4, 0.3);
        v[(0, 1)] = 1.0;
        v[(1, 0)] = 1.0;
        let m = normalized(v);
        let full = binarize(&m, 0.0).unwrap();
        assert_eq!(full.labels(), &[3, 3, 3, 3]);
        let empty = binarize(&m, 1.0).unwrap();
        assert_eq!(empty.edge_count(), 0);
        assert_eq!(empty.labels(), &[0, 0, 0, 0]);
        assert!(binarize(
            &SimilarityMatrix::new(DMatrix::zeros(2, 2), Method::Rbf),
            0.5
        )
        .is_err());
    }

    #[test]
    fn binarize_three_nodes() {
        let m = normalized(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.2, 0.6, 0.2, 1.0, 0.9, 0.6, 0.9, 1.0],
        ));
        let g = binarize(&m, 0.5).unwrap();
        assert_eq!(g.edges(), vec![(0, 2), (1, 2)]);
        assert_eq!(g.labels(), &[1, 1, 2]);
    }

    #[test]
    fn density_threshold_keeps_top_edges() {
        let m = normalized(DMatrix::from_row_slice(
            3,
            3,
            &[1.0, 0.2, 0.6, 0.2, 1.0, 0.9, 0.6, 0.9, 1.0],
        ));
        let t = density_threshold(&m, 2.0 / 3.0).unwrap();
        assert_eq!(binarize(&m, t).unwrap().edge_count(), 2);
        assert_eq!(
            binarize(&m, density_threshold(&m, 0.0).unwrap())
                .unwrap()
                .edge_count(),
            0
        );
        assert_eq!(
            binarize(&m, density_threshold(&m, 1.0).unwrap())
                .unwrap()
                .edge_count(),
            3
        );
    }

    #[test]
    fn wl_single_node() {
        let g = LabeledGraph::from_edges(1, &[]).unwrap();
        let f = wl_features(&g, 2);
        assert_eq!(f.total(), 3);
        for it in 0..3 {
            assert_eq!(f.counts[&(it, 0)], 1);
        }
    }

    #[test]
    fn wl_path_iteration_zero() {
        let g = LabeledGraph::from_edges(2, &[(0, 1)]).unwrap();
        let f = wl_features(&g, 0);
        assert_eq!(f.counts.len(), 1);
        assert_eq!(f.counts[&(0, 1)], 2);
    }

    #[test]
    fn wl_disjoint_degree_histograms() {
        let a = LabeledGraph::from_edges(2, &[(0, 1)]).unwrap();
        let b = LabeledGraph::from_edges(2, &[]).unwrap();
        let (k, _) = wl_kernel(&[a, b], 0);
        assert_eq!(k.values[(0, 1)], 0.0);
        assert_eq!(k.values[(0, 0)], 4.0);
    }

    #[test]
    fn wl_labels_concordant_across_graphs() {
        let a = LabeledGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let b = LabeledGraph::from_edges(3, &[(2, 0), (0, 1)]).unwrap();
        let (k, labeler) = wl_kernel(&[a, b], 3);
        assert_eq!(k.values[(0, 1)], k.values[(0, 0)]);
        assert_eq!(labeler.depth(), 3);
    }

    #[test]
    fn labeler_roundtrips_through_json() {
        let g = LabeledGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut labeler = WlLabeler::new();
        let f = labeler.features(&g, 2);
        let mut back: WlLabeler =
            serde_json::from_str(&serde_json::to_string(&labeler).unwrap()).unwrap();
        back.reindex();
        assert_eq!(back.features(&g, 2), f);
    }

    #[test]
    fn sp_triangles_and_empty() {
        let tri = LabeledGraph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let k = sp_kernel(&[tri.clone(), tri]);
        assert_eq!(k.values[(0, 1)], 9.0);
        let e = LabeledGraph::from_edges(4, &[]).unwrap();
        let k = sp_kernel(&[e.clone(), e]);
        assert_eq!(k.values[(0, 1)], 0.0);
    }

    #[test]
    fn sp_path_distances() {
        let p = LabeledGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let h = shortest_path_features(&p);
        assert_eq!(h[&(1, 2, 1)], 2);
        assert_eq!(h[&(2, 2, 1)], 1);
        assert_eq!(h[&(1, 2, 2)], 2);
        assert_eq!(h[&(1, 1, 3)], 1);
    }

    #[test]
    fn permutation_check() {
        let g = LabeledGraph::from_edges(3, &[(0, 1)]).unwrap();
        assert!(g.permuted(&[0, 0, 1]).is_err());
        let p = g.permuted(&[2, 0, 1]).unwrap();
        assert!(p.has_edge(2, 0));
    }
}
