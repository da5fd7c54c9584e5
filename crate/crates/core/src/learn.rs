//! Kernel matrices, the dual SVM solver and leave-one-out evaluation.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::SeverityClass;
use crate::error::{Error, Result};
use crate::linalg::{is_psd, max_asymmetry};
use crate::similarity::SimilarityMatrix;

/// Relative tolerance used for PSD checks: min eigenvalue ≥ −tol·max eigenvalue.
pub const PSD_TOLERANCE: f64 = 1e-8;

/// Subject × subject Gram matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    pub values: DMatrix<f64>,
    pub kind: String,
    pub normalized: bool,
}

impl KernelMatrix {
    pub fn new(values: DMatrix<f64>, kind: impl Into<String>) -> Self {
        Self {
            values,
            kind: kind.into(),
            normalized: false,
        }
    }

    pub fn size(&self) -> usize {
        self.values.nrows()
    }

    /// Checks symmetry (1e-10) and positive semi-definiteness.
    pub fn validate(&self) -> Result<()> {
        if !self.values.is_square() {
            return Err(Error::Shape(format!("{} kernel is not square", self.kind)));
        }
        let asym = max_asymmetry(&self.values);
        if asym > 1e-10 {
            return Err(Error::Domain(format!(
                "{} kernel is not symmetric (off by {asym:e})",
                self.kind
            )));
        }
        if !is_psd(&self.values, PSD_TOLERANCE) {
            return Err(Error::Domain(format!(
                "{} kernel is not positive semi-definite",
                self.kind
            )));
        }
        Ok(())
    }

    pub fn is_psd(&self) -> bool {
        is_psd(&self.values, PSD_TOLERANCE)
    }
}

/// Strict upper triangle of a similarity matrix, row-major.
pub fn vectorize_upper(m: &SimilarityMatrix) -> Vec<f64> {
    m.upper_triangle()
}

/// Pairwise dot products of feature vectors.
pub fn linear_kernel(features: &[Vec<f64>]) -> Result<KernelMatrix> {
    let len = features.first().map_or(0, Vec::len);
    if let Some(bad) = features.iter().position(|f| f.len() != len) {
        return Err(Error::Shape(format!(
            "feature vector {bad} has length {}, expected {len}",
            features[bad].len()
        )));
    }
    let n = features.len();
    let mut values = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v: f64 = features[a]
                .iter()
                .zip(&features[b])
                .map(|(x, y)| x * y)
                .sum();
            values[(a, b)] = v;
            values[(b, a)] = v;
        }
    }
    Ok(KernelMatrix::new(values, "linear"))
}

/// Cosine normalization k(a,b)/√(k(a,a)k(b,b)).
///
/// `names` is used only to identify a subject with a non-positive self
/// similarity in the error message.
pub fn normalize_kernel(k: &KernelMatrix, names: Option<&[String]>) -> Result<KernelMatrix> {
    let n = k.size();
    let diag: Vec<f64> = (0..n).map(|i| k.values[(i, i)]).collect();
    if let Some(i) = diag.iter().position(|&d| !(d > 0.0)) {
        let who = names
            .and_then(|ns| ns.get(i))
            .cloned()
            .unwrap_or_else(|| format!("#{i}"));
        return Err(Error::Degenerate(format!(
            "subject {who} has zero self-similarity under the {} kernel",
            k.kind
        )));
    }
    let values = DMatrix::from_fn(n, n, |a, b| {
        if a == b {
            1.0
        } else {
            k.values[(a, b)] / (diag[a] * diag[b]).sqrt()
        }
    });
    Ok(KernelMatrix {
        values,
        kind: k.kind.clone(),
        normalized: true,
    })
}

/// Convex combination of kernels.
pub fn sum_kernel(kernels: &[KernelMatrix], weights: &[f64]) -> Result<KernelMatrix> {
    let first = kernels
        .first()
        .ok_or_else(|| Error::Domain("sum kernel needs at least one kernel".into()))?;
    if kernels.len() != weights.len() {
        return Err(Error::Domain(format!(
            "{} kernels but {} weights",
            kernels.len(),
            weights.len()
        )));
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Domain(format!(
            "weights {weights:?} are not convex coefficients"
        )));
    }
    if let Some(bad) = kernels
        .iter()
        .find(|k| k.values.shape() != first.values.shape())
    {
        return Err(Error::Domain(format!(
            "kernel {} has shape {:?}, expected {:?}",
            bad.kind,
            bad.values.shape(),
            first.values.shape()
        )));
    }
    if kernels.iter().any(|k| !k.normalized) {
        log::warn!("summing unnormalized kernels; scales may differ widely");
    }
    let mut values = DMatrix::zeros(first.size(), first.size());
    for (k, &w) in kernels.iter().zip(weights) {
        values += &k.values * w;
    }
    let kind = format!(
        "sum({})",
        kernels
            .iter()
            .zip(weights)
            .map(|(k, w)| format!("{w}*{}", k.kind))
            .collect::<Vec<_>>()
            .join(" + ")
    );
    Ok(KernelMatrix {
        values,
        kind,
        normalized: kernels.iter().all(|k| k.normalized),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvmConfig {
    /// Box constraint.
    pub c: f64,
    /// Stopping tolerance on the maximal KKT violation.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

/// Binary kernel SVM in dual form.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    /// Training labels (±1).
    pub labels: Vec<f64>,
    pub bias: f64,
    pub support: Vec<usize>,
    pub c: f64,
    pub iterations: usize,
    /// Final maximal KKT violation.
    pub violation: f64,
}

impl SvmModel {
    /// Signed decision value Σ α_i y_i k(x_i, x) + b.
    pub fn decision(&self, kernel_row: &[f64]) -> Result<f64> {
        if kernel_row.len() != self.alphas.len() {
            return Err(Error::Shape(format!(
                "kernel row has {} entries, model was trained on {}",
                kernel_row.len(),
                self.alphas.len()
            )));
        }
        Ok(self
            .support
            .iter()
            .map(|&i| self.alphas[i] * self.labels[i] * kernel_row[i])
            .sum::<f64>()
            + self.bias)
    }
}

/// Dual objective Σα − ½ Σ α_i α_j y_i y_j K_ij (to be maximized).
pub fn dual_objective(k: &DMatrix<f64>, y: &[f64], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut quad = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        for j in 0..n {
            quad += alphas[i] * alphas[j] * y[i] * y[j] * k[(i, j)];
        }
    }
    alphas.iter().sum::<f64>() - 0.5 * quad
}

/// Trains a C-SVM on a precomputed kernel with SMO, selecting the maximal
/// violating pair at every step.
pub fn train_svm(k: &DMatrix<f64>, y: &[f64], cfg: &SvmConfig) -> Result<SvmModel> {
    let n = y.len();
    if k.shape() != (n, n) {
        return Err(Error::Shape(format!(
            "kernel is {:?} but there are {n} labels",
            k.shape()
        )));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::Domain("labels must be +1 or -1".into()));
    }
    if !y.contains(&1.0) || !y.contains(&-1.0) {
        return Err(Error::Domain(
            "training labels contain a single class".into(),
        ));
    }
    if !(cfg.c > 0.0) || !(cfg.tol > 0.0) {
        return Err(Error::Domain(format!(
            "invalid SVM config C={} tol={}",
            cfg.c, cfg.tol
        )));
    }
    let c = cfg.c;
    let q = |i: usize, j: usize| y[i] * y[j] * k[(i, j)];
    let mut alpha = vec![0.0; n];
    // gradient of ½αᵀQα − eᵀα
    let mut grad = vec![-1.0; n];
    let in_up = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] < c) || (y[t] < 0.0 && a[t] > 0.0);
    let in_low = |t: usize, a: &[f64]| (y[t] > 0.0 && a[t] > 0.0) || (y[t] < 0.0 && a[t] < c);

    let mut iterations = 0;
    let violation = loop {
        let mut i = usize::MAX;
        let mut gmax = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut gmin = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(t, &alpha) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(t, &alpha) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        let gap = gmax - gmin;
        if gap.is_nan() {
            return Err(Error::Domain("kernel contains non-finite values".into()));
        }
        if i == usize::MAX || j == usize::MAX || gap <= cfg.tol {
            break gap.max(0.0);
        }
        if iterations == cfg.max_iter {
            return Err(Error::Convergence {
                context: "SMO".into(),
                iterations,
                residual: gap,
            });
        }
        iterations += 1;

        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = k[(i, i)] + k[(j, j)] - 2.0 * k[(i, j)];
        if quad <= 0.0 {
            quad = 1e-12;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for (t, g) in grad.iter_mut().enumerate() {
            *g += q(t, i) * di + q(t, j) * dj;
        }
    };

    // bias from free vectors, or the midpoint of the feasible interval
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    let mut free_sum = 0.0;
    let mut free = 0usize;
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            free_sum += yg;
        }
    }
    let rho = if free > 0 {
        free_sum / free as f64
    } else {
        0.5 * (ub + lb)
    };
    let support = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    Ok(SvmModel {
        alphas: alpha,
        labels: y.to_vec(),
        bias: -rho,
        support,
        c,
        iterations,
        violation,
    })
}

/// Signed decision value of `model` for a test subject.
pub fn predict(model: &SvmModel, kernel_row: &[f64]) -> Result<f64> {
    model.decision(kernel_row)
}

/// One-vs-rest machines, one per severity class (`None` when a class has no
/// positive or no negative training subject).
#[derive(Debug, Clone, PartialEq)]
pub struct OvrModel {
    pub machines: [Option<SvmModel>; 3],
}

impl OvrModel {
    pub fn decision_values(&self, kernel_row: &[f64]) -> Result<[f64; 3]> {
        let mut out = [f64::NEG_INFINITY; 3];
        for (c, m) in self.machines.iter().enumerate() {
            if let Some(m) = m {
                out[c] = m.decision(kernel_row)?;
            }
        }
        Ok(out)
    }

    pub fn predict(&self, kernel_row: &[f64]) -> Result<SeverityClass> {
        Ok(argmax_class(&self.decision_values(kernel_row)?))
    }
}

/// Largest decision value; ties go to the milder class.
pub fn argmax_class(values: &[f64; 3]) -> SeverityClass {
    let mut best = 0;
    for c in 1..3 {
        if values[c] > values[best] {
            best = c;
        }
    }
    SeverityClass::ALL[best]
}

pub fn train_ovr(k: &DMatrix<f64>, labels: &[SeverityClass], cfg: &SvmConfig) -> Result<OvrModel> {
    let mut machines: [Option<SvmModel>; 3] = [None, None, None];
    for class in SeverityClass::ALL {
        let y: Vec<f64> = labels
            .iter()
            .map(|&l| if l == class { 1.0 } else { -1.0 })
            .collect();
        if !y.contains(&1.0) || !y.contains(&-1.0) {
            log::warn!(
                "class {class} cannot be trained one-vs-rest in this fold; its decision is -inf"
            );
            continue;
        }
        machines[class.index()] =
            Some(train_svm(k, &y, cfg).map_err(|e| e.context(format!("{class}-vs-rest")))?);
    }
    Ok(OvrModel { machines })
}

/// Trains one-vs-rest machines on `kernels`/`labels` and predicts each test row.
pub fn multiclass_predict(
    train_kernel: &DMatrix<f64>,
    labels: &[SeverityClass],
    test_rows: &[Vec<f64>],
    cfg: &SvmConfig,
) -> Result<Vec<SeverityClass>> {
    let model = train_ovr(train_kernel, labels, cfg)?;
    test_rows.iter().map(|row| model.predict(row)).collect()
}

fn principal_submatrix(k: &DMatrix<f64>, keep: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(keep.len(), keep.len(), |a, b| k[(keep[a], keep[b])])
}

/// Machines trained with subject `held_out` removed. Only the principal
/// submatrix of the remaining subjects is read.
pub fn train_fold(
    k: &DMatrix<f64>,
    labels: &[SeverityClass],
    held_out: usize,
    cfg: &SvmConfig,
) -> Result<OvrModel> {
    let keep: Vec<usize> = (0..labels.len()).filter(|&i| i != held_out).collect();
    let train_labels: Vec<SeverityClass> = keep.iter().map(|&i| labels[i]).collect();
    train_ovr(&principal_submatrix(k, &keep), &train_labels, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectPrediction {
    pub id: String,
    pub truth: SeverityClass,
    pub predicted: SeverityClass,
    /// Decision value per class (mild, moderate, severe); `null` when that
    /// class had no machine in the fold.
    pub decision_values: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub kernel: String,
    pub subjects: Vec<SubjectPrediction>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: [[usize; 3]; 3],
    pub correct: usize,
    pub total: usize,
    /// Percent correct.
    pub accuracy: f64,
    /// Percent with two decimals, truncated (e.g. 32/58 → "55.17").
    pub accuracy_display: String,
    /// Every held-out subject had an all-zero kernel row.
    pub uninformative_kernel: bool,
    pub config: serde_json::Value,
}

/// Two-decimal percentage, truncated toward zero.
pub fn format_accuracy(correct: usize, total: usize) -> String {
    if total == 0 {
        return "0.00".into();
    }
    let hundredths = correct * 10_000 / total;
    format!("{}.{:02}", hundredths / 100, hundredths % 100)
}

/// Leave-one-out evaluation of one-vs-rest SVMs on a precomputed kernel.
pub fn loo_evaluate(
    kernel: &KernelMatrix,
    labels: &[SeverityClass],
    ids: &[String],
    cfg: &SvmConfig,
) -> Result<EvalReport> {
    let n = labels.len();
    if kernel.size() != n || ids.len() != n {
        return Err(Error::Shape(format!(
            "kernel is {}x{} for {} labels and {} ids",
            kernel.size(),
            kernel.size(),
            n,
            ids.len()
        )));
    }
    if n < 3 {
        return Err(Error::Domain(format!(
            "leave-one-out needs at least 3 subjects, got {n}"
        )));
    }
    let k = &kernel.values;
    let folds: Vec<(SeverityClass, [f64; 3], bool)> = (0..n)
        .into_par_iter()
        .map(|held| {
            let model =
                train_fold(k, labels, held, cfg).map_err(|e| e.context(format!("fold {held}")))?;
            let row: Vec<f64> = (0..n)
                .filter(|&i| i != held)
                .map(|i| k[(held, i)])
                .collect();
            let dv = model.decision_values(&row)?;
            Ok((argmax_class(&dv), dv, row.iter().all(|&v| v == 0.0)))
        })
        .collect::<Result<_>>()?;

    let mut confusion = [[0usize; 3]; 3];
    let mut subjects = Vec::with_capacity(n);
    for (i, (pred, dv, _)) in folds.iter().enumerate() {
        confusion[labels[i].index()][pred.index()] += 1;
        subjects.push(SubjectPrediction {
            id: ids[i].clone(),
            truth: labels[i],
            predicted: *pred,
            decision_values: dv.iter().map(|v| v.is_finite().then_some(*v)).collect(),
        });
    }
    let correct = (0..3).map(|c| confusion[c][c]).sum();
    let uninformative = folds.iter().all(|f| f.2);
    if uninformative {
        log::warn!(
            "{} kernel is uninformative: every held-out row is zero",
            kernel.kind
        );
    }
    Ok(EvalReport {
        kernel: kernel.kind.clone(),
        subjects,
        confusion,
        correct,
        total: n,
        accuracy: 100.0 * correct as f64 / n as f64,
        accuracy_display: format_accuracy(correct, n),
        uninformative_kernel: uninformative,
        config: serde_json::Value::Null,
    })
}

/// Leave-one-out accuracy where C is chosen per outer fold by an inner
/// leave-one-out over `grid` (first best value wins).
pub fn loo_evaluate_with_c_grid(
    kernel: &KernelMatrix,
    labels: &[SeverityClass],
    ids: &[String],
    base: &SvmConfig,
    grid: &[f64],
) -> Result<EvalReport> {
    if grid.is_empty() {
        return loo_evaluate(kernel, labels, ids, base);
    }
    let n = labels.len();
    let k = &kernel.values;
    let mut confusion = [[0usize; 3]; 3];
    let mut subjects = Vec::with_capacity(n);
    for held in 0..n {
        let keep: Vec<usize> = (0..n).filter(|&i| i != held).collect();
        let inner = KernelMatrix::new(principal_submatrix(k, &keep), kernel.kind.clone());
        let inner_labels: Vec<SeverityClass> = keep.iter().map(|&i| labels[i]).collect();
        let inner_ids: Vec<String> = keep.iter().map(|&i| ids[i].clone()).collect();
        let mut best: Option<(f64, usize)> = None;
        for &c in grid {
            let cfg = SvmConfig { c, ..*base };
            let r = loo_evaluate(&inner, &inner_labels, &inner_ids, &cfg)?;
            if best.is_none_or(|(_, n)| r.correct > n) {
                best = Some((c, r.correct));
            }
        }
        let cfg = SvmConfig {
            c: best.map_or(base.c, |b| b.0),
            ..*base
        };
        let model = train_fold(k, labels, held, &cfg)?;
        let row: Vec<f64> = keep.iter().map(|&i| k[(held, i)]).collect();
        let dv = model.decision_values(&row)?;
        let pred = argmax_class(&dv);
        confusion[labels[held].index()][pred.index()] += 1;
        subjects.push(SubjectPrediction {
            id: ids[held].clone(),
            truth: labels[held],
            predicted: pred,
            decision_values: dv.iter().map(|v| v.is_finite().then_some(*v)).collect(),
        });
    }
    let correct = (0..3).map(|c| confusion[c][c]).sum();
    Ok(EvalReport {
        kernel: kernel.kind.clone(),
        subjects,
        confusion,
        correct,
        total: n,
        accuracy: 100.0 * correct as f64 / n as f64,
        accuracy_display: format_accuracy(correct, n),
        uninformative_kernel: false,
        config: serde_json::Value::Null,
    })
}
