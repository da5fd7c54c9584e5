//! Dual SVM training with SMO on a precomputed kernel, then one-vs-rest
//! leave-one-out evaluation.
//!
//! ```bash
//! cargo run -p brainkernel --example svm_loo
//! ```

use brainkernel::data::SeverityClass;
use brainkernel::learn::{dual_objective, loo_evaluate, train_svm, KernelMatrix, SvmConfig};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> brainkernel::Result<()> {
    // Binary problem: two noisy clusters in the plane, linear kernel.
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let points: Vec<[f64; 2]> = (0..20)
        .map(|i| {
            let c = if i % 2 == 0 { 1.0 } else { -1.0 };
            [
                c + rng.random_range(-0.8..0.8),
                c + rng.random_range(-0.8..0.8),
            ]
        })
        .collect();
    let y: Vec<f64> = (0..20)
        .map(|i| if i % 2 == 0 { 1.0 } else { -1.0 })
        .collect();
    let k = DMatrix::from_fn(20, 20, |i, j| {
        points[i][0] * points[j][0] + points[i][1] * points[j][1]
    });
    let model = train_svm(&k, &y, &SvmConfig::default())?;
    let balance: f64 = model.alphas.iter().zip(&y).map(|(a, y)| a * y).sum();
    println!(
        "SMO: {} iterations, {} support vectors, bias {:.4}, dual objective {:.6}",
        model.iterations,
        model.support.len(),
        model.bias,
        dual_objective(&k, &y, &model.alphas)
    );
    println!(
        "sum(alpha * y) = {balance:.2e}, final violation {:.2e}",
        model.violation
    );

    // Three-class problem with a block kernel: 1 within class, 0 across.
    let labels: Vec<SeverityClass> = (0..12)
        .map(|i| SeverityClass::from_index(i % 3).expect("index below 3"))
        .collect();
    let block = DMatrix::from_fn(12, 12, |i, j| f64::from(u8::from(labels[i] == labels[j])));
    let ids: Vec<String> = (1..=12).map(|i| format!("s{i:02}")).collect();
    let report = loo_evaluate(
        &KernelMatrix::new(block, "block"),
        &labels,
        &ids,
        &SvmConfig::default(),
    )?;
    println!(
        "\nblock kernel LOO: {}/{} correct ({}%)",
        report.correct, report.total, report.accuracy_display
    );

    // An identity kernel carries no information about held-out subjects.
    let report = loo_evaluate(
        &KernelMatrix::new(DMatrix::identity(12, 12), "identity"),
        &labels,
        &ids,
        &SvmConfig::default(),
    )?;
    println!(
        "identity kernel LOO: {}% (uninformative: {})",
        report.accuracy_display, report.uninformative_kernel
    );
    Ok(())
}
