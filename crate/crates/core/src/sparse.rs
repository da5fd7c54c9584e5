//! ℓ1 graphs: nonnegative sparse coding of each region over all the others.
//!
//! For target column `i` of the dictionary `X` (N × K) we solve
//!
//! ```text
//! min_a ‖x_i − X a‖² + λ‖a‖₁   subject to a ≥ 0, a_i = 0
//! ```
//!
//! by cyclic coordinate descent on the Gram matrix `XᵀX`. Each coordinate has
//! the closed-form update `a_j ← max(0, c_j − λ/2) / ‖x_j‖²` where
//! `c_j = x_jᵀr + ‖x_j‖² a_j` and `r` is the current residual.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::similarity::{Method, SimilarityMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub lambda: f64,
    /// Tolerance on the KKT residual.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            lambda: 0.1,
            tol: 1e-6,
            max_iter: 10_000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Domain(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.tol > 0.0) {
            return Err(Error::Domain(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        if self.max_iter == 0 {
            return Err(Error::Domain("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseCode {
    pub coefficients: Vec<f64>,
    pub objective: f64,
    /// Completed coordinate-descent sweeps.
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Objective after each sweep (entry 0 is the starting point a = 0).
    pub sweep_objectives: Vec<f64>,
}

/// Objective ‖x_i − X a‖² + λ‖a‖₁ evaluated directly from the dictionary.
pub fn lasso_objective(x: &DMatrix<f64>, target: usize, a: &[f64], lambda: f64) -> f64 {
    let r = lasso_residual(x, target, a);
    r.norm_squared() + lambda * a.iter().map(|v| v.abs()).sum::<f64>()
}

pub fn lasso_residual(x: &DMatrix<f64>, target: usize, a: &[f64]) -> DVector<f64> {
    x.column(target) - x * DVector::from_column_slice(a)
}

/// Largest violation of the nonnegative-LASSO optimality conditions, computed
/// from scratch: for j ≠ i, g_j = −2 x_jᵀ r + λ must be 0 where a_j > 0 and
/// nonnegative where a_j = 0.
pub fn kkt_residual(x: &DMatrix<f64>, target: usize, a: &[f64], lambda: f64) -> f64 {
    let r = lasso_residual(x, target, a);
    let mut worst = 0.0_f64;
    for j in 0..x.ncols() {
        if j == target {
            continue;
        }
        let g = -2.0 * x.column(j).dot(&r) + lambda;
        let v = if a[j] > 0.0 { g.abs() } else { (-g).max(0.0) };
        worst = worst.max(v);
    }
    worst
}

struct GramProblem<'a> {
    gram: &'a DMatrix<f64>,
    target: usize,
}

impl GramProblem<'_> {
    fn solve(&self, cfg: &SolverConfig) -> Result<SparseCode> {
        let k = self.gram.nrows();
        let i = self.target;
        let b: Vec<f64> = (0..k).map(|j| self.gram[(j, i)]).collect();
        let xx = self.gram[(i, i)];
        let mut a = vec![0.0; k];
        // q = G a
        let mut q = vec![0.0; k];
        let objective = |a: &[f64], q: &[f64]| {
            let mut v = xx;
            for j in 0..k {
                v += a[j] * (q[j] - 2.0 * b[j]) + cfg.lambda * a[j];
            }
            v
        };
        let kkt = |a: &[f64], q: &[f64]| {
            let mut worst = 0.0_f64;
            for j in 0..k {
                if j == i {
                    continue;
                }
                let g = -2.0 * (b[j] - q[j]) + cfg.lambda;
                let v = if a[j] > 0.0 { g.abs() } else { (-g).max(0.0) };
                worst = worst.max(v);
            }
            worst
        };

        let mut sweep_objectives = vec![objective(&a, &q)];
        let mut residual = kkt(&a, &q);
        let mut sweeps = 0;
        while residual > cfg.tol {
            if sweeps == cfg.max_iter {
                return Err(Error::Convergence {
                    context: format!("nonnegative lasso for column {i}"),
                    iterations: sweeps,
                    residual,
                });
            }
            for j in 0..k {
                let gjj = self.gram[(j, j)];
                if j == i || gjj <= 0.0 {
                    continue;
                }
                let c = b[j] - q[j] + gjj * a[j];
                let new = ((c - 0.5 * cfg.lambda) / gjj).max(0.0);
                let delta = new - a[j];
                if delta != 0.0 {
                    a[j] = new;
                    for (t, qt) in q.iter_mut().enumerate() {
                        *qt += delta * self.gram[(t, j)];
                    }
                }
            }
            sweeps += 1;
            sweep_objectives.push(objective(&a, &q));
            residual = kkt(&a, &q);
        }
        Ok(SparseCode {
            objective: *sweep_objectives
                .last()
                .expect("at least the initial objective"),
            coefficients: a,
            iterations: sweeps,
            kkt_residual: residual,
            sweep_objectives,
        })
    }
}

/// Codes column `target` of `x` (N × K) over the remaining columns.
pub fn solve_nonneg_lasso(
    x: &DMatrix<f64>,
    target: usize,
    cfg: &SolverConfig,
) -> Result<SparseCode> {
    cfg.validate()?;
    if target >= x.ncols() {
        return Err(Error::Domain(format!(
            "target column {target} out of range for {} columns",
            x.ncols()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain(
            "dictionary contains non-finite values".into(),
        ));
    }
    let gram = x.transpose() * x;
    GramProblem {
        gram: &gram,
        target,
    }
    .solve(cfg)
}

/// Builds the symmetrized ℓ1 graph of a K × N data matrix.
///
/// Each row is scaled to unit ℓ2 norm (zero rows are left as zero) and coded
/// over the other rows; the coefficient matrix `A` is averaged with its
/// transpose and the diagonal is zeroed.
pub fn l1_graph(data: &DMatrix<f64>, cfg: &SolverConfig) -> Result<SimilarityMatrix> {
    cfg.validate()?;
    let k = data.nrows();
    let mut dict = data.transpose();
    for j in 0..k {
        let norm = dict.column(j).norm();
        if norm > 0.0 {
            dict.column_mut(j).unscale_mut(norm);
        }
    }
    let gram = dict.transpose() * &dict;
    let codes: Vec<SparseCode> = (0..k)
        .into_par_iter()
        .map(|i| {
            GramProblem {
                gram: &gram,
                target: i,
            }
            .solve(cfg)
            .map_err(|e| e.context(format!("region {i}")))
        })
        .collect::<Result<_>>()?;
    for (i, c) in codes.iter().enumerate() {
        log::debug!(
            "l1 graph region {i}: {} sweeps, kkt residual {:.2e}",
            c.iterations,
            c.kkt_residual
        );
    }
    let a = DMatrix::from_fn(k, k, |i, j| codes[i].coefficients[j]);
    let mut w = (&a + a.transpose()) * 0.5;
    w.fill_diagonal(0.0);
    Ok(SimilarityMatrix::new(w, Method::L1Graph))
}
