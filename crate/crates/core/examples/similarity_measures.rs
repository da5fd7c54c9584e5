//! Region-by-region similarity of one synthetic subject under Pearson
//! correlation, RBF and PCA followed by RBF, before and after min-max
//! normalization.
//!
//! ```bash
//! cargo run -p brainkernel --example similarity_measures
//! ```

use brainkernel::data::{generate_synthetic_cohort_with_blocks, znormalize_rows};
use brainkernel::similarity::{
    normalize_unit_interval, pca_rbf_similarity, pearson_similarity, rbf_similarity, Gamma,
    SimilarityMatrix,
};

/// Mean similarity of region pairs inside a planted block and across blocks.
fn block_contrast(m: &SimilarityMatrix, blocks: &[usize]) -> (f64, f64) {
    let (mut within, mut across) = ((0.0, 0), (0.0, 0));
    for i in 0..m.size() {
        for j in (i + 1)..m.size() {
            let acc = if blocks[i] == blocks[j] {
                &mut within
            } else {
                &mut across
            };
            acc.0 += m.get(i, j);
            acc.1 += 1;
        }
    }
    (within.0 / within.1 as f64, across.0 / across.1 as f64)
}

fn main() -> brainkernel::Result<()> {
    let synth = generate_synthetic_cohort_with_blocks(3, 3, 12, 200)?;
    let subject = &synth.cohort.subjects()[0];
    let blocks = &synth.blocks[0];
    println!(
        "subject {} ({} regions x {} samples), blocks {:?}",
        subject.id,
        subject.regions(),
        subject.samples(),
        blocks
    );

    let (z, flat) = znormalize_rows(&subject.data);
    assert!(flat.is_empty());

    let measures = [
        ("correlation", pearson_similarity(&z)),
        ("rbf", rbf_similarity(&z, Gamma::Auto)?),
        ("pca_rbf", pca_rbf_similarity(&z, 10, Gamma::Auto)?),
    ];
    println!("\n{:<12} {:>10} {:>10}", "measure", "within", "across");
    for (name, raw) in measures {
        let norm = normalize_unit_interval(&raw)?;
        let (w, a) = block_contrast(&norm, blocks);
        println!("{name:<12} {w:>10.3} {a:>10.3}");
    }

    let corr = normalize_unit_interval(&pearson_similarity(&z))?;
    println!("\nnormalized correlation, first four regions:");
    for i in 0..4 {
        let row: Vec<String> = (0..4).map(|j| format!("{:.3}", corr.get(i, j))).collect();
        println!("  {}", row.join("  "));
    }
    Ok(())
}
