//! Normalize kernels from two graph constructions and combine them with
//! convex weights.
//!
//! ```bash
//! cargo run -p brainkernel --release --example sum_kernel
//! ```

use brainkernel::data::generate_synthetic_cohort;
use brainkernel::graph::{binarize, wl_kernel};
use brainkernel::learn::{loo_evaluate, normalize_kernel, sum_kernel, KernelMatrix, SvmConfig};
use brainkernel::linalg::eigen_range;
use brainkernel::pipeline::{subject_similarity, RunConfig};
use brainkernel::similarity::Method;

fn main() -> brainkernel::Result<()> {
    let cohort = generate_synthetic_cohort(2, 12, 10, 120)?;
    let cfg = RunConfig::default();
    let ids = cohort.ids();
    let labels = cohort.labels();

    let mut kernels: Vec<KernelMatrix> = Vec::new();
    for method in [Method::Correlation, Method::L1Graph] {
        let graphs = cohort
            .subjects()
            .iter()
            .map(|s| binarize(&subject_similarity(&s.data, method, &cfg)?, cfg.threshold))
            .collect::<brainkernel::Result<Vec<_>>>()?;
        let (k, _) = wl_kernel(&graphs, cfg.wl_h);
        let k = normalize_kernel(&k, Some(&ids))?;
        let r = loo_evaluate(&k, &labels, &ids, &cfg.svm)?;
        println!("{method:<12} WL kernel LOO {}%", r.accuracy_display);
        kernels.push(k);
    }

    for w in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let k = sum_kernel(&kernels, &[w, 1.0 - w])?;
        let (lo, hi) = eigen_range(&k.values);
        let r = loo_evaluate(&k, &labels, &ids, &SvmConfig::default())?;
        println!(
            "weights ({w:.2}, {:.2}): eigenvalues [{lo:.2e}, {hi:.2}], LOO {}%",
            1.0 - w,
            r.accuracy_display
        );
    }
    Ok(())
}
