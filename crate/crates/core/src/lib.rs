//! Subject classification from multivariate time series through per-subject
//! similarity graphs and graph kernels.
//!
//! The pipeline, stage by stage:
//!
//! 1. [`data`]: load a cohort (manifest + per-subject region × time matrices)
//!    and bin clinical scores into three severity classes.
//! 2. [`similarity`], [`sparse`], [`topology`]: build a K × K region
//!    similarity matrix per subject (Pearson correlation, RBF, PCA + RBF,
//!    nonnegative sparse-coding ℓ1 graph, or persistence scale-space kernel
//!    between Betti-1 diagrams of delay embeddings), then rescale it to [0, 1].
//! 3. [`graph`]: threshold into degree-labelled graphs and compare subjects
//!    with the Weisfeiler-Lehman subtree or shortest-path kernel. The
//!    "traditional" baseline instead vectorizes the upper triangle and uses a
//!    linear kernel ([`learn::linear_kernel`]).
//! 4. [`learn`]: one-vs-rest SVMs (SMO) evaluated by leave-one-out.
//!
//! [`pipeline`] wires the stages together with on-disk caching; the
//! `brainkernel` binary exposes it on the command line.

// `!(x > 0.0)` is used on purpose to reject NaN alongside out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod graph;
pub mod io;
pub mod learn;
pub mod linalg;
pub mod pipeline;
pub mod similarity;
pub mod sparse;
pub mod topology;

pub use error::{Error, Result};
