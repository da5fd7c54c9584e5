//! Point-wise similarity matrices between the regions of one subject.

use std::fmt;

use nalgebra::{DMatrix, SVD};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a similarity matrix was constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Correlation,
    Rbf,
    PcaRbf,
    L1Graph,
    Persistence,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Correlation,
        Method::Rbf,
        Method::PcaRbf,
        Method::L1Graph,
        Method::Persistence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Correlation => "correlation",
            Method::Rbf => "rbf",
            Method::PcaRbf => "pca_rbf",
            Method::L1Graph => "l1_graph",
            Method::Persistence => "persistence",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown graph method {s:?}")))
    }
}

/// K×K symmetric similarity between the regions of one subject.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: DMatrix<f64>,
    pub method: Method,
    pub normalized: bool,
    /// Regions whose series carried no information (e.g. constant).
    pub degenerate_rows: Vec<usize>,
}

impl SimilarityMatrix {
    pub fn new(values: DMatrix<f64>, method: Method) -> Self {
        Self {
            values,
            method,
            normalized: false,
            degenerate_rows: Vec::new(),
        }
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// Off-diagonal entries of the strict upper triangle, row-major.
    pub fn upper_triangle(&self) -> Vec<f64> {
        let k = self.size();
        let mut out = Vec::with_capacity(k * k.saturating_sub(1) / 2);
        for i in 0..k {
            for j in (i + 1)..k {
                out.push(self.values[(i, j)]);
            }
        }
        out
    }
}

fn centered_rows(data: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>) {
    let mut c = data.clone();
    let mut norms = Vec::with_capacity(data.nrows());
    for i in 0..data.nrows() {
        let mut row = c.row_mut(i);
        let mean = row.mean();
        row.add_scalar_mut(-mean);
        norms.push(row.norm());
    }
    (c, norms)
}

/// Pearson correlation between every pair of rows.
///
/// Rows with (numerically) zero variance are flagged and get similarity 0 to
/// everything, including themselves.
pub fn pearson_similarity(data: &DMatrix<f64>) -> SimilarityMatrix {
    let k = data.nrows();
    let (c, norms) = centered_rows(data);
    let constant: Vec<bool> = (0..k)
        .map(|i| {
            let scale = data.row(i).amax().max(1.0) * (data.ncols() as f64).sqrt();
            norms[i] <= 1e-12 * scale
        })
        .collect();
    let mut values = DMatrix::zeros(k, k);
    for i in 0..k {
        if constant[i] {
            continue;
        }
        values[(i, i)] = 1.0;
        for j in (i + 1)..k {
            if constant[j] {
                continue;
            }
            let r = (c.row(i).dot(&c.row(j)) / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            values[(i, j)] = r;
            values[(j, i)] = r;
        }
    }
    let degenerate_rows: Vec<usize> = (0..k).filter(|&i| constant[i]).collect();
    if !degenerate_rows.is_empty() {
        log::warn!("pearson similarity: constant rows {degenerate_rows:?} treated as unconnected");
    }
    SimilarityMatrix {
        values,
        method: Method::Correlation,
        normalized: false,
        degenerate_rows,
    }
}

/// RBF bandwidth: an explicit γ or the median heuristic γ = 1/(2·median²).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Gamma {
    #[default]
    Auto,
    Fixed(f64),
}

fn squared_distances(data: &DMatrix<f64>) -> DMatrix<f64> {
    let k = data.nrows();
    let mut d2 = DMatrix::zeros(k, k);
    for i in 0..k {
        for j in (i + 1)..k {
            let v = (data.row(i) - data.row(j)).norm_squared();
            d2[(i, j)] = v;
            d2[(j, i)] = v;
        }
    }
    d2
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Resolves `gamma` against the pairwise row distances of `data`.
pub fn resolve_gamma(data: &DMatrix<f64>, gamma: Gamma) -> Result<f64> {
    match gamma {
        Gamma::Fixed(g) if g > 0.0 && g.is_finite() => Ok(g),
        Gamma::Fixed(g) => Err(Error::Domain(format!(
            "RBF gamma must be positive, got {g}"
        ))),
        Gamma::Auto => {
            let d2 = squared_distances(data);
            let k = data.nrows();
            let mut dists: Vec<f64> = (0..k)
                .flat_map(|i| ((i + 1)..k).map(move |j| (i, j)))
                .map(|(i, j)| d2[(i, j)].sqrt())
                .collect();
            let med = median(&mut dists);
            if !(med > 0.0) {
                return Err(Error::Config(
                    "median pairwise distance is zero; set an explicit RBF gamma".into(),
                ));
            }
            Ok(1.0 / (2.0 * med * med))
        }
    }
}

/// Gaussian similarity exp(-γ‖x_i − x_j‖²) between rows.
pub fn rbf_similarity(data: &DMatrix<f64>, gamma: Gamma) -> Result<SimilarityMatrix> {
    let g = resolve_gamma(data, gamma)?;
    let values = squared_distances(data).map(|d| (-g * d).exp());
    Ok(SimilarityMatrix::new(values, Method::Rbf))
}

/// Projects the rows (as samples) onto their top-`d` principal directions.
///
/// Components are ordered by decreasing variance and each direction is signed
/// so that its largest-magnitude loading is positive.
pub fn pca_features(data: &DMatrix<f64>, d: usize) -> Result<DMatrix<f64>> {
    let (k, n) = data.shape();
    if d == 0 || d > k.min(n) {
        return Err(Error::Domain(format!(
            "PCA component count must lie in 1..={}, got {d}",
            k.min(n)
        )));
    }
    let (scores, _) = pca_decompose(data);
    Ok(scores.columns(0, d).into_owned())
}

/// Full decomposition of the column-centered data: (scores K×r, directions r×N)
/// with r = min(K, N), so that `scores * directions` reproduces the centered data.
pub fn pca_decompose(data: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let (k, n) = data.shape();
    let mut centered = data.clone();
    for j in 0..n {
        let mut col = centered.column_mut(j);
        let mean = col.mean();
        col.add_scalar_mut(-mean);
    }
    let svd = SVD::new(centered, true, true);
    let u = svd.u.expect("left singular vectors requested");
    let vt = svd.v_t.expect("right singular vectors requested");
    let r = k.min(n);
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .total_cmp(&svd.singular_values[a])
            .then(a.cmp(&b))
    });

    let mut scores = DMatrix::zeros(k, r);
    let mut dirs = DMatrix::zeros(r, n);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = svd.singular_values[src];
        let v = vt.row(src);
        let lead = v.iter().enumerate().fold((0, 0.0_f64), |best, (i, x)| {
            if x.abs() > best.1.abs() {
                (i, *x)
            } else {
                best
            }
        });
        let sign = if lead.1 < 0.0 { -1.0 } else { 1.0 };
        for i in 0..k {
            scores[(i, dst)] = sign * sigma * u[(i, src)];
        }
        for j in 0..n {
            dirs[(dst, j)] = sign * v[j];
        }
    }
    (scores, dirs)
}

/// RBF similarity on the top-`d` PCA projections of the rows.
pub fn pca_rbf_similarity(data: &DMatrix<f64>, d: usize, gamma: Gamma) -> Result<SimilarityMatrix> {
    let feats = pca_features(data, d)?;
    let mut m = rbf_similarity(&feats, gamma)?;
    m.method = Method::PcaRbf;
    Ok(m)
}

/// Min-max rescales the off-diagonal entries to [0, 1]; the diagonal is kept.
pub fn normalize_unit_interval(m: &SimilarityMatrix) -> Result<SimilarityMatrix> {
    let k = m.size();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..k {
        for j in 0..k {
            if i != j {
                lo = lo.min(m.values[(i, j)]);
                hi = hi.max(m.values[(i, j)]);
            }
        }
    }
    if !(hi > lo) {
        return Err(Error::Degenerate(format!(
            "{} similarity has constant off-diagonal entries; thresholding would be trivial",
            m.method
        )));
    }
    let span = hi - lo;
    let mut values = m.values.clone();
    for i in 0..k {
        for j in 0..k {
            if i != j {
                values[(i, j)] = (m.values[(i, j)] - lo) / span;
            }
        }
    }
    Ok(SimilarityMatrix {
        values,
        method: m.method,
        normalized: true,
        degenerate_rows: m.degenerate_rows.clone(),
    })
}
