//! End-to-end stages behind the command-line tool: graph construction with an
//! on-disk cache, kernel computation, leave-one-out evaluation and reporting.
//!
//! Output layout under `out_dir`:
//!
//! ```text
//! graphs/<method>/<subject>.csv   normalized K×K similarity
//! graphs/<method>/<subject>.json  sidecar with method, hashes, flags
//! kernels/<name>.csv|.json        subject×subject Gram matrix and metadata
//! reports/<feature>.json          traditional vs graph-kernel comparison
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::{self, Cohort, SeverityClass};
use crate::error::{Error, Result};
use crate::graph::{self, LabeledGraph};
use crate::io::{hash_parts, write_atomic, write_json_atomic};
use crate::learn::{self, EvalReport, KernelMatrix, SvmConfig};
use crate::similarity::{self, Gamma, Method, SimilarityMatrix};
use crate::sparse::{self, SolverConfig};
use crate::topology::{self, PersistenceParams};

/// Subject×subject kernel family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelChoice {
    #[default]
    Wl,
    Sp,
    /// Linear kernel on vectorized upper triangles.
    Linear,
    /// Weighted sum over `sum_methods`.
    Sum,
}

impl std::str::FromStr for KernelChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wl" => Ok(Self::Wl),
            "sp" => Ok(Self::Sp),
            "linear" => Ok(Self::Linear),
            "sum" => Ok(Self::Sum),
            other => Err(Error::Config(format!(
                "unknown kernel {other:?} (expected wl, sp, linear or sum)"
            ))),
        }
    }
}

/// Every tunable of a run. Unknown keys are rejected when deserializing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub manifest: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub method: Method,
    /// z-normalize every region series before building similarities.
    pub znormalize: bool,
    pub rbf_gamma: Gamma,
    /// PCA components, clipped to min(K, N).
    pub pca_components: usize,
    /// Edge threshold on normalized similarities (strict >).
    pub threshold: f64,
    /// When set, a per-subject threshold keeping this fraction of edges
    /// replaces `threshold`.
    pub density: Option<f64>,
    pub persistence: PersistenceParams,
    pub lasso: SolverConfig,
    pub wl_h: usize,
    pub svm: SvmConfig,
    /// Inner leave-one-out grid over C; empty disables it.
    pub c_grid: Vec<f64>,
    pub kernel: KernelChoice,
    pub sum_methods: Vec<Method>,
    pub sum_weights: Vec<f64>,
    pub normalize_kernels: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            out_dir: PathBuf::from("out"),
            seed: 1,
            method: Method::Correlation,
            znormalize: true,
            rbf_gamma: Gamma::Auto,
            pca_components: 10,
            threshold: 0.5,
            density: None,
            persistence: PersistenceParams::default(),
            lasso: SolverConfig::default(),
            wl_h: 3,
            svm: SvmConfig::default(),
            c_grid: Vec::new(),
            kernel: KernelChoice::Wl,
            sum_methods: vec![Method::Persistence, Method::L1Graph],
            sum_weights: vec![0.5, 0.5],
            normalize_kernels: true,
        }
    }
}

impl RunConfig {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(0.0..=1.0).contains(&self.threshold) {
            return bad(format!(
                "threshold must lie in [0, 1], got {}",
                self.threshold
            ));
        }
        if let Some(d) = self.density {
            if !(0.0..=1.0).contains(&d) {
                return bad(format!("density must lie in [0, 1], got {d}"));
            }
        }
        if self.pca_components == 0 {
            return bad("pca_components must be at least 1".into());
        }
        let p = &self.persistence;
        if p.m == 0 || p.tau == 0 {
            return bad(format!(
                "embedding needs m ≥ 1 and tau ≥ 1, got m={} tau={}",
                p.m, p.tau
            ));
        }
        if !(p.sigma > 0.0) || !p.sigma.is_finite() {
            return bad(format!("sigma must be positive, got {}", p.sigma));
        }
        self.lasso
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        let s = &self.svm;
        if !(s.c > 0.0) || !(s.tol > 0.0) || s.max_iter == 0 {
            return bad(format!("svm needs c > 0, tol > 0, max_iter ≥ 1, got {s:?}"));
        }
        if self.c_grid.iter().any(|c| !(*c > 0.0)) {
            return bad(format!(
                "c_grid values must be positive, got {:?}",
                self.c_grid
            ));
        }
        if let Gamma::Fixed(g) = self.rbf_gamma {
            if !(g > 0.0) || !g.is_finite() {
                return bad(format!("rbf gamma must be positive, got {g}"));
            }
        }
        if self.sum_methods.is_empty() {
            return bad("sum_methods is empty".into());
        }
        if self.sum_methods.len() != self.sum_weights.len() {
            return bad(format!(
                "{} sum methods but {} weights",
                self.sum_methods.len(),
                self.sum_weights.len()
            ));
        }
        for (i, m) in self.sum_methods.iter().enumerate() {
            if self.sum_methods[..i].contains(m) {
                return bad(format!("sum method {m} listed twice"));
            }
        }
        let total: f64 = self.sum_weights.iter().sum();
        if self.sum_weights.iter().any(|w| !(*w >= 0.0)) || (total - 1.0).abs() > 1e-9 {
            return bad(format!(
                "sum weights must be nonnegative and sum to 1, got {:?}",
                self.sum_weights
            ));
        }
        Ok(())
    }

    /// Hash of every setting that affects `method`'s similarity matrices.
    pub fn graph_hash(&self, method: Method) -> String {
        let params = match method {
            Method::Correlation => serde_json::Value::Null,
            Method::Rbf => serde_json::json!({ "gamma": self.rbf_gamma }),
            Method::PcaRbf => {
                serde_json::json!({ "gamma": self.rbf_gamma, "d": self.pca_components })
            }
            Method::L1Graph => serde_json::json!(self.lasso),
            Method::Persistence => serde_json::json!(self.persistence),
        };
        hash_parts([
            "graph".to_string(),
            method.as_str().to_string(),
            self.znormalize.to_string(),
            params.to_string(),
        ])
    }

    /// Hash of the full configuration, excluding input and output paths.
    pub fn config_hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serializes");
        if let Some(obj) = v.as_object_mut() {
            obj.remove("manifest");
            obj.remove("out_dir");
        }
        hash_parts([v.to_string()])
    }

    pub fn load_cohort(&self) -> Result<Cohort> {
        let manifest = self.manifest.as_ref().ok_or_else(|| {
            Error::Config("no manifest given (set `manifest` or pass --manifest)".into())
        })?;
        data::load_manifest(manifest)
    }

    fn graph_dir(&self, method: Method) -> PathBuf {
        self.out_dir.join("graphs").join(method.as_str())
    }

    /// Methods whose graphs feed the configured kernel.
    pub fn feature_methods(&self) -> Vec<Method> {
        match self.kernel {
            KernelChoice::Sum => self.sum_methods.clone(),
            _ => vec![self.method],
        }
    }

    /// Short name of the evaluated feature, e.g. `correlation` or
    /// `sum(persistence,l1_graph)`.
    pub fn feature_name(&self) -> String {
        match self.kernel {
            KernelChoice::Sum => format!(
                "sum({})",
                self.sum_methods
                    .iter()
                    .map(|m| m.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            ),
            _ => self.method.as_str().to_string(),
        }
    }
}

/// Normalized similarity matrix of one subject under `method`.
pub fn subject_similarity(
    data: &DMatrix<f64>,
    method: Method,
    cfg: &RunConfig,
) -> Result<SimilarityMatrix> {
    let (input, flat) = if cfg.znormalize {
        data::znormalize_rows(data)
    } else {
        (data.clone(), Vec::new())
    };
    let raw = match method {
        Method::Correlation => similarity::pearson_similarity(&input),
        Method::Rbf => similarity::rbf_similarity(&input, cfg.rbf_gamma)?,
        Method::PcaRbf => {
            let d = cfg.pca_components.min(input.nrows()).min(input.ncols());
            similarity::pca_rbf_similarity(&input, d, cfg.rbf_gamma)?
        }
        Method::L1Graph => sparse::l1_graph(&input, &cfg.lasso)?,
        Method::Persistence => topology::persistence_similarity(&input, &cfg.persistence)?,
    };
    let mut m = similarity::normalize_unit_interval(&raw)?;
    for r in flat {
        if !m.degenerate_rows.contains(&r) {
            m.degenerate_rows.push(r);
        }
    }
    m.degenerate_rows.sort_unstable();
    Ok(m)
}

/// Sidecar metadata stored next to each similarity CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub subject: String,
    pub method: Method,
    pub normalized: bool,
    pub config_hash: String,
    pub input_hash: String,
    pub content_hash: String,
    pub degenerate_rows: Vec<usize>,
}

fn input_hash(id: &str, data: &DMatrix<f64>) -> String {
    hash_parts([id.to_string(), data::matrix_to_csv(data)])
}

fn graph_paths(dir: &Path, id: &str) -> (PathBuf, PathBuf) {
    (
        dir.join(format!("{id}.csv")),
        dir.join(format!("{id}.json")),
    )
}

fn read_meta(path: &Path) -> Result<GraphMeta> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Loads a cached matrix if its sidecar matches the expected hashes.
fn load_cached(
    csv: &Path,
    meta_path: &Path,
    config_hash: &str,
    input: &str,
) -> Option<SimilarityMatrix> {
    let meta = read_meta(meta_path).ok()?;
    if meta.config_hash != config_hash || meta.input_hash != input {
        return None;
    }
    let text = fs::read_to_string(csv).ok()?;
    if hash_parts([text.as_bytes()]) != meta.content_hash {
        return None;
    }
    let values = data::read_matrix_csv(csv).ok()?;
    Some(SimilarityMatrix {
        values,
        method: meta.method,
        normalized: meta.normalized,
        degenerate_rows: meta.degenerate_rows,
    })
}

#[derive(Debug, Clone)]
pub struct BuildSummary {
    pub method: Method,
    pub graphs: Vec<SimilarityMatrix>,
    pub built: usize,
    pub skipped: usize,
}

/// Builds (or reuses cached) similarity matrices for every subject.
///
/// Subjects already written with the same configuration and input data are
/// skipped. On error the files written so far are kept.
pub fn build_graphs(cfg: &RunConfig, cohort: &Cohort, method: Method) -> Result<BuildSummary> {
    let dir = cfg.graph_dir(method);
    let config_hash = cfg.graph_hash(method);
    let mut graphs = Vec::with_capacity(cohort.len());
    let (mut built, mut skipped) = (0, 0);
    for s in cohort.subjects() {
        let (csv, meta_path) = graph_paths(&dir, &s.id);
        let input = input_hash(&s.id, &s.data);
        if let Some(m) = load_cached(&csv, &meta_path, &config_hash, &input) {
            skipped += 1;
            graphs.push(m);
            continue;
        }
        let m = subject_similarity(&s.data, method, cfg)
            .map_err(|e| e.context(format!("subject {}", s.id)))?;
        let text = data::matrix_to_csv(&m.values);
        write_atomic(&csv, text.as_bytes())?;
        let meta = GraphMeta {
            subject: s.id.clone(),
            method,
            normalized: m.normalized,
            config_hash: config_hash.clone(),
            input_hash: input,
            content_hash: hash_parts([text.as_bytes()]),
            degenerate_rows: m.degenerate_rows.clone(),
        };
        write_json_atomic(&meta_path, &meta)?;
        built += 1;
        graphs.push(m);
    }
    if skipped > 0 {
        log::info!("{method}: skipped {skipped} subjects (cached)");
    }
    Ok(BuildSummary {
        method,
        graphs,
        built,
        skipped,
    })
}

/// Previously built graphs, or a description of every missing or stale artifact.
fn try_load_graphs(
    cfg: &RunConfig,
    cohort: &Cohort,
    method: Method,
) -> Result<Vec<SimilarityMatrix>, Vec<String>> {
    let dir = cfg.graph_dir(method);
    let config_hash = cfg.graph_hash(method);
    let mut graphs = Vec::with_capacity(cohort.len());
    let mut problems = Vec::new();
    for s in cohort.subjects() {
        let (csv, meta_path) = graph_paths(&dir, &s.id);
        if !csv.exists() || !meta_path.exists() {
            problems.push(format!("{} (missing)", csv.display()));
            continue;
        }
        match read_meta(&meta_path) {
            Ok(meta) if meta.config_hash != config_hash => problems.push(format!(
                "{} (built with config {}, current config {})",
                csv.display(),
                &meta.config_hash[..12],
                &config_hash[..12]
            )),
            Ok(_) => match load_cached(&csv, &meta_path, &config_hash, &input_hash(&s.id, &s.data))
            {
                Some(m) => graphs.push(m),
                None => problems.push(format!("{} (stale or corrupt)", csv.display())),
            },
            Err(e) => problems.push(format!("{} ({e})", meta_path.display())),
        }
    }
    if problems.is_empty() {
        Ok(graphs)
    } else {
        Err(problems)
    }
}

fn missing_artifacts_error(problems: &[(Method, Vec<String>)]) -> Error {
    const SHOWN: usize = 5;
    let mut msg = String::from(
        "graphs are not built for this configuration; run build-graphs first. Missing artifacts:",
    );
    for (method, list) in problems {
        let _ = write!(msg, "\n  {method}: {} of the cohort", list.len());
        for p in list.iter().take(SHOWN) {
            let _ = write!(msg, "\n    {p}");
        }
        if list.len() > SHOWN {
            let _ = write!(msg, "\n    ... and {} more", list.len() - SHOWN);
        }
    }
    Error::Config(msg)
}

/// Loads previously built graphs without building anything.
///
/// Fails with a list of every missing or stale artifact.
pub fn load_graphs(
    cfg: &RunConfig,
    cohort: &Cohort,
    method: Method,
) -> Result<Vec<SimilarityMatrix>> {
    try_load_graphs(cfg, cohort, method).map_err(|p| missing_artifacts_error(&[(method, p)]))
}

/// Graphs for every method the configured feature needs. Single-method
/// features are built on demand; sum features require prebuilt components.
pub fn feature_graphs(
    cfg: &RunConfig,
    cohort: &Cohort,
) -> Result<Vec<(Method, Vec<SimilarityMatrix>)>> {
    match cfg.kernel {
        KernelChoice::Sum => {
            let mut out = Vec::new();
            let mut problems = Vec::new();
            for &m in &cfg.sum_methods {
                match try_load_graphs(cfg, cohort, m) {
                    Ok(g) => out.push((m, g)),
                    Err(p) => problems.push((m, p)),
                }
            }
            if problems.is_empty() {
                Ok(out)
            } else {
                Err(missing_artifacts_error(&problems))
            }
        }
        _ => Ok(vec![(
            cfg.method,
            build_graphs(cfg, cohort, cfg.method)?.graphs,
        )]),
    }
}

fn binarize_all(
    cfg: &RunConfig,
    graphs: &[SimilarityMatrix],
    threshold: f64,
) -> Result<Vec<LabeledGraph>> {
    graphs
        .iter()
        .map(|m| {
            let t = match cfg.density {
                Some(d) => graph::density_threshold(m, d)?,
                None => threshold,
            };
            graph::binarize(m, t)
        })
        .collect()
}

/// Kernel families a single feature can produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Wl,
    Sp,
    Linear,
}

fn family_kernel(
    cfg: &RunConfig,
    family: Family,
    graphs: &[SimilarityMatrix],
    threshold: f64,
    ids: &[String],
) -> Result<(KernelMatrix, Option<graph::WlLabeler>)> {
    let (k, labeler) = match family {
        Family::Wl => {
            let (k, l) = graph::wl_kernel(&binarize_all(cfg, graphs, threshold)?, cfg.wl_h);
            (k, Some(l))
        }
        Family::Sp => (
            graph::sp_kernel(&binarize_all(cfg, graphs, threshold)?),
            None,
        ),
        Family::Linear => {
            let feats: Vec<Vec<f64>> = graphs.iter().map(learn::vectorize_upper).collect();
            (learn::linear_kernel(&feats)?, None)
        }
    };
    let k = if cfg.normalize_kernels {
        learn::normalize_kernel(&k, Some(ids))?
    } else {
        k
    };
    Ok((k, labeler))
}

/// Kernel of one family over a (possibly summed) feature.
fn feature_kernel(
    cfg: &RunConfig,
    family: Family,
    components: &[(Method, Vec<SimilarityMatrix>)],
    threshold: f64,
    ids: &[String],
) -> Result<(KernelMatrix, Option<graph::WlLabeler>)> {
    if let [(_, graphs)] = components {
        return family_kernel(cfg, family, graphs, threshold, ids);
    }
    let mut kernels = Vec::with_capacity(components.len());
    for (m, graphs) in components {
        let (k, _) = family_kernel(cfg, family, graphs, threshold, ids)
            .map_err(|e| e.context(format!("{m}")))?;
        kernels.push(k);
    }
    let mut k = learn::sum_kernel(&kernels, &cfg.sum_weights)?;
    k.kind = format!(
        "sum[{}]",
        kernels
            .iter()
            .map(|k| k.kind.as_str())
            .collect::<Vec<_>>()
            .join("+")
    );
    Ok((k, None))
}

fn family_of(choice: KernelChoice) -> Family {
    match choice {
        KernelChoice::Sp => Family::Sp,
        KernelChoice::Linear => Family::Linear,
        KernelChoice::Wl | KernelChoice::Sum => Family::Wl,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub name: String,
    pub kind: String,
    pub normalized: bool,
    pub subjects: Vec<String>,
    pub labels: Vec<SeverityClass>,
    pub config_hash: String,
    pub min_eigenvalue: f64,
    pub max_eigenvalue: f64,
}

/// Computes the configured kernel and writes it under `kernels/`.
///
/// Sum kernels combine WL kernels of the component graphs. For WL the
/// compression tables are written to `<name>.labeler.json`.
pub fn compute_kernel(cfg: &RunConfig, cohort: &Cohort) -> Result<(KernelMatrix, KernelMeta)> {
    let ids = cohort.ids();
    let components = feature_graphs(cfg, cohort)?;
    let family = family_of(cfg.kernel);
    let (k, labeler) = feature_kernel(cfg, family, &components, cfg.threshold, &ids)?;
    let kernel_tag = match cfg.kernel {
        KernelChoice::Wl => "wl",
        KernelChoice::Sp => "sp",
        KernelChoice::Linear => "linear",
        KernelChoice::Sum => "sum_wl",
    };
    let name = format!("{}_{kernel_tag}", sanitize(&cfg.feature_name()));
    let dir = cfg.out_dir.join("kernels");
    write_atomic(
        dir.join(format!("{name}.csv")),
        data::matrix_to_csv(&k.values).as_bytes(),
    )?;
    if let Some(l) = labeler {
        write_json_atomic(dir.join(format!("{name}.labeler.json")), &l)?;
    }
    let (lo, hi) = crate::linalg::eigen_range(&k.values);
    let meta = KernelMeta {
        name: name.clone(),
        kind: k.kind.clone(),
        normalized: k.normalized,
        subjects: ids,
        labels: cohort.labels(),
        config_hash: cfg.config_hash(),
        min_eigenvalue: lo,
        max_eigenvalue: hi,
    };
    write_json_atomic(dir.join(format!("{name}.json")), &meta)?;
    Ok((k, meta))
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '_' {
                c
            } else {
                '_'
            }
        })
        .collect::<String>()
        .trim_matches('_')
        .to_string()
}

/// Traditional vs graph-kernel comparison for one feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEvaluation {
    pub feature: String,
    /// Threshold used for the graph path; `None` when a density target was used.
    pub threshold: Option<f64>,
    pub traditional: EvalReport,
    /// WL and SP reports, in that order, for those that could be computed.
    pub graph: Vec<EvalReport>,
    /// Graph kernels that failed, with the reason.
    pub graph_failures: BTreeMap<String, String>,
    /// Kind of the best graph kernel (first wins on ties).
    pub best_graph: String,
    pub config_hash: String,
    pub config: RunConfig,
}

impl FeatureEvaluation {
    pub fn best_graph_report(&self) -> &EvalReport {
        self.graph
            .iter()
            .find(|r| r.kernel == self.best_graph)
            .expect("best graph report is present")
    }

    pub fn traditional_accuracy(&self) -> f64 {
        self.traditional.accuracy
    }

    pub fn graph_accuracy(&self) -> f64 {
        self.best_graph_report().accuracy
    }

    /// File stem of the report: feature name, plus threshold in sweeps.
    pub fn file_stem(&self, with_threshold: bool) -> String {
        let base = sanitize(&self.feature);
        match (with_threshold, self.threshold) {
            (true, Some(t)) => format!("{base}_t{t}"),
            _ => base,
        }
    }
}

fn run_loo(
    cfg: &RunConfig,
    k: &KernelMatrix,
    labels: &[SeverityClass],
    ids: &[String],
) -> Result<EvalReport> {
    let mut r = if cfg.c_grid.is_empty() {
        learn::loo_evaluate(k, labels, ids, &cfg.svm)?
    } else {
        learn::loo_evaluate_with_c_grid(k, labels, ids, &cfg.svm, &cfg.c_grid)?
    };
    r.config = serde_json::json!({
        "svm": cfg.svm,
        "c_grid": cfg.c_grid,
        "normalized_kernel": k.normalized,
    });
    Ok(r)
}

/// Runs both the traditional and the graph-kernel leave-one-out paths for the
/// configured feature at `threshold`.
pub fn evaluate_at(
    cfg: &RunConfig,
    cohort: &Cohort,
    components: &[(Method, Vec<SimilarityMatrix>)],
    threshold: f64,
) -> Result<FeatureEvaluation> {
    let ids = cohort.ids();
    let labels = cohort.labels();
    let (trad, _) = feature_kernel(cfg, Family::Linear, components, threshold, &ids)?;
    let traditional =
        run_loo(cfg, &trad, &labels, &ids).map_err(|e| e.context("traditional kernel"))?;

    let mut graph = Vec::new();
    let mut graph_failures = BTreeMap::new();
    for (family, name) in [(Family::Wl, "wl"), (Family::Sp, "sp")] {
        let result = feature_kernel(cfg, family, components, threshold, &ids)
            .and_then(|(k, _)| run_loo(cfg, &k, &labels, &ids));
        match result {
            Ok(r) => graph.push(r),
            Err(e) => {
                log::warn!("{name} kernel failed for {}: {e}", cfg.feature_name());
                graph_failures.insert(name.to_string(), e.to_string());
            }
        }
    }
    let best = graph
        .iter()
        .fold(None::<&EvalReport>, |best, r| match best {
            Some(b) if b.correct >= r.correct => Some(b),
            _ => Some(r),
        })
        .ok_or_else(|| {
            Error::Degenerate(format!(
                "no graph kernel could be evaluated: {}",
                graph_failures
                    .values()
                    .cloned()
                    .collect::<Vec<_>>()
                    .join("; ")
            ))
        })?;
    Ok(FeatureEvaluation {
        feature: cfg.feature_name(),
        threshold: cfg.density.is_none().then_some(threshold),
        best_graph: best.kernel.clone(),
        traditional,
        graph,
        graph_failures,
        config_hash: cfg.config_hash(),
        config: cfg.clone(),
    })
}

/// Evaluates at the configured threshold, or at every threshold in `sweep`,
/// writing one report file per threshold under `reports/`.
pub fn evaluate(
    cfg: &RunConfig,
    cohort: &Cohort,
    sweep: Option<&[f64]>,
) -> Result<Vec<(PathBuf, FeatureEvaluation)>> {
    let components = feature_graphs(cfg, cohort)?;
    let thresholds = sweep.map_or_else(|| vec![cfg.threshold], <[f64]>::to_vec);
    let mut out = Vec::with_capacity(thresholds.len());
    for t in thresholds {
        let mut c = cfg.clone();
        c.threshold = t;
        let eval = evaluate_at(&c, cohort, &components, t)
            .map_err(|e| e.context(format!("threshold {t}")))?;
        let path = cfg
            .out_dir
            .join("reports")
            .join(format!("{}.json", eval.file_stem(sweep.is_some())));
        write_json_atomic(&path, &eval)?;
        out.push((path, eval));
    }
    Ok(out)
}

/// Parses `a:b:step` into the inclusive list a, a+step, …, ≤ b.
pub fn parse_sweep(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || {
        Error::Config(format!(
            "threshold sweep must look like a:b:step, got {spec:?}"
        ))
    };
    let [a, b, step] = parts.as_slice() else {
        return Err(err());
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| err());
    let (a, b, step) = (parse(a)?, parse(b)?, parse(step)?);
    if !(step > 0.0) || !(a <= b) || !(0.0..=1.0).contains(&a) || !(0.0..=1.0).contains(&b) {
        return Err(Error::Config(format!(
            "threshold sweep needs 0 ≤ a ≤ b ≤ 1 and step > 0, got {spec:?}"
        )));
    }
    let count = ((b - a) / step + 1e-9).floor() as usize;
    // round away accumulated binary error so 0.1 steps print as 0.3, not 0.30000000000000004
    Ok((0..=count)
        .map(|i| ((a + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

/// Reads every report under `out_dir/reports`, sorted by file name.
pub fn read_reports(out_dir: impl AsRef<Path>) -> Result<Vec<FeatureEvaluation>> {
    let dir = out_dir.as_ref().join("reports");
    let entries = match fs::read_dir(&dir) {
        Ok(entries) => entries,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
        Err(e) => return Err(Error::io(&dir, e)),
    };
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                path: p.clone(),
                row: e.line(),
                message: e.to_string(),
            })
        })
        .collect()
}

/// Row label used in result tables.
pub fn display_feature(feature: &str) -> String {
    let single = |m: &str| match m {
        "correlation" => "Correlation".to_string(),
        "rbf" => "RBF".to_string(),
        "pca_rbf" => "PCA".to_string(),
        "l1_graph" => "L1 graph".to_string(),
        "persistence" => "PD".to_string(),
        other => other.to_string(),
    };
    match feature
        .strip_prefix("sum(")
        .and_then(|s| s.strip_suffix(')'))
    {
        Some(inner) => format!(
            "Sum kernel ({})",
            inner.split(',').map(single).collect::<Vec<_>>().join(", ")
        ),
        None => single(feature),
    }
}

/// Plain-text table with one row per evaluated feature.
pub fn render_table(evals: &[FeatureEvaluation]) -> String {
    let rows: Vec<[String; 3]> = evals
        .iter()
        .map(|e| {
            let mut feature = display_feature(&e.feature);
            if let Some(t) = e.threshold {
                feature.push_str(&format!(" @ {t}"));
            }
            let all: Vec<String> = e
                .graph
                .iter()
                .map(|r| format!("{} {}", r.kernel, r.accuracy_display))
                .collect();
            [
                feature,
                e.traditional.accuracy_display.clone(),
                format!(
                    "{} ({})",
                    e.best_graph_report().accuracy_display,
                    all.join(", ")
                ),
            ]
        })
        .collect();
    let header = ["Feature", "Traditional Kernel", "Graph Kernel"];
    let widths: Vec<usize> = (0..3)
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let line = |cells: [&str; 3], out: &mut String| {
        let padded: Vec<String> = cells
            .iter()
            .zip(&widths)
            .map(|(c, &w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", padded.join(" | ").trim_end());
    };
    line(header, &mut out);
    let _ = writeln!(
        out,
        "{}",
        widths
            .iter()
            .map(|&w| "-".repeat(w))
            .collect::<Vec<_>>()
            .join("-|-")
    );
    for r in &rows {
        line([&r[0], &r[1], &r[2]], &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<RunConfig>(r#"{"threshhold": 0.3}"#).unwrap_err();
        assert!(err.to_string().contains("threshhold"));
        let partial: RunConfig =
            serde_json::from_str(r#"{"threshold": 0.3, "svm": {"c": 10}}"#).unwrap();
        assert_eq!(partial.threshold, 0.3);
        assert_eq!(partial.svm.c, 10.0);
        assert_eq!(partial.svm.tol, 1e-3);
        assert_eq!(partial.wl_h, 3);
    }

    #[test]
    fn validation() {
        assert!(RunConfig::default().validate().is_ok());
        let bad = RunConfig {
            sum_weights: vec![0.7, 0.7],
            ..RunConfig::default()
        };
        assert!(matches!(bad.validate(), Err(Error::Config(_))));
        let bad = RunConfig {
            threshold: 1.5,
            ..RunConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn hashes_track_relevant_settings() {
        let a = RunConfig::default();
        let b = RunConfig {
            threshold: 0.3,
            ..a.clone()
        };
        assert_eq!(
            a.graph_hash(Method::Correlation),
            b.graph_hash(Method::Correlation)
        );
        assert_ne!(a.config_hash(), b.config_hash());
        let c = RunConfig {
            lasso: SolverConfig {
                lambda: 0.2,
                ..a.lasso
            },
            ..a.clone()
        };
        assert_eq!(
            a.graph_hash(Method::Correlation),
            c.graph_hash(Method::Correlation)
        );
        assert_ne!(a.graph_hash(Method::L1Graph), c.graph_hash(Method::L1Graph));
        let moved = RunConfig {
            out_dir: "elsewhere".into(),
            ..a.clone()
        };
        assert_eq!(a.config_hash(), moved.config_hash());
    }

    #[test]
    fn sweep_parsing() {
        assert_eq!(parse_sweep("0.3:0.5:0.1").unwrap(), vec![0.3, 0.4, 0.5]);
        assert_eq!(parse_sweep("0.5:0.5:0.1").unwrap(), vec![0.5]);
        assert!(parse_sweep("0.5:0.3:0.1").is_err());
        assert!(parse_sweep("0.1:0.5").is_err());
        assert!(parse_sweep("0.1:0.5:0").is_err());
    }

    #[test]
    fn feature_labels() {
        assert_eq!(display_feature("correlation"), "Correlation");
        assert_eq!(
            display_feature("sum(persistence,l1_graph)"),
            "Sum kernel (PD, L1 graph)"
        );
    }
}
