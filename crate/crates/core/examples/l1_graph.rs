//! Sparse coding of each region over the others with nonnegative LASSO, and
//! the symmetrized ℓ1 graph it produces.
//!
//! ```bash
//! cargo run -p brainkernel --example l1_graph
//! ```

use brainkernel::data::{generate_synthetic_cohort_with_blocks, znormalize_rows};
use brainkernel::sparse::{kkt_residual, l1_graph, solve_nonneg_lasso, SolverConfig};

fn main() -> brainkernel::Result<()> {
    let synth = generate_synthetic_cohort_with_blocks(5, 3, 8, 200)?;
    let subject = &synth.cohort.subjects()[0];
    let blocks = &synth.blocks[0];
    let (z, _) = znormalize_rows(&subject.data);

    // Dictionary: one unit-norm column per region.
    let mut x = z.transpose();
    for mut col in x.column_iter_mut() {
        let n = col.norm();
        col /= n;
    }

    let cfg = SolverConfig::default();
    println!("lambda = {}, blocks {:?}\n", cfg.lambda, blocks);
    for target in 0..3 {
        let code = solve_nonneg_lasso(&x, target, &cfg)?;
        let support: Vec<String> = code
            .coefficients
            .iter()
            .enumerate()
            .filter(|(_, &a)| a > 0.0)
            .map(|(j, a)| format!("{j}:{a:.3}"))
            .collect();
        println!(
            "region {target}: {} sweeps, objective {:.4}, kkt {:.1e} (independent check {:.1e})",
            code.iterations,
            code.objective,
            code.kkt_residual,
            kkt_residual(&x, target, &code.coefficients, cfg.lambda)
        );
        println!("  support {}", support.join(" "));
    }

    let graph = l1_graph(&z, &cfg)?;
    println!("\nsymmetrized weights:");
    for (i, block) in blocks.iter().enumerate() {
        let row: Vec<String> = (0..graph.size())
            .map(|j| format!("{:.2}", graph.get(i, j)))
            .collect();
        println!("  [{}] {}", block, row.join(" "));
    }
    Ok(())
}
