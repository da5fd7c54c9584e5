//! Acceptance suite: one pass/fail line per criterion, non-zero exit if any
//! criterion fails.
//!
//! Criterion 8 needs the real ABIDE cohort and only runs when
//! `BRAINKERNEL_ABIDE_MANIFEST` names a manifest; otherwise it checks the
//! protocol constants and reports that the data run was skipped.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration, Instant};

use brainkernel::data::{
    bin_ados, generate_synthetic_cohort, load_manifest, write_cohort, SeverityClass,
};
use brainkernel::graph::{binarize, sp_kernel, wl_kernel, LabeledGraph, WlLabeler};
use brainkernel::learn::{format_accuracy, train_svm, vectorize_upper, SvmConfig};
use brainkernel::pipeline::{self, FeatureEvaluation, RunConfig};
use brainkernel::similarity::{
    normalize_unit_interval, pearson_similarity, Method, SimilarityMatrix,
};
use brainkernel::sparse::{solve_nonneg_lasso, SolverConfig};
use brainkernel::topology::{
    pssk, pssk_gram, rips_persistence, MaxScale, PersistenceDiagram, PersistencePair,
    PersistenceParams, PointCloud,
};
use common::*;
use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(limit: Duration, start: Instant) -> Result<Duration, String> {
    let t = start.elapsed();
    check(t < limit, || format!("took {t:.1?}, limit {limit:?}"))?;
    Ok(t)
}

fn sorted_pairs(d: &PersistenceDiagram) -> Vec<(f64, f64)> {
    let mut v: Vec<(f64, f64)> = d.pairs.iter().map(|p| (p.birth, p.death)).collect();
    v.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    v
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..500 {
        let n = rng.random_range(1..=7);
        let dim = rng.random_range(2..=3);
        // every fifth cloud lives on an integer grid to exercise ties
        let points = if case % 5 == 0 {
            grid_cloud(&mut rng, n, dim)
        } else {
            random_cloud(&mut rng, n, dim)
        };
        let cloud = PointCloud::new(points.clone()).map_err(|e| e.to_string())?;
        let [h0, h1] = rips_persistence(&cloud, MaxScale::Auto).map_err(|e| e.to_string())?;
        let (o0, o1) = brute_force_rips(&points);
        check(sorted_pairs(&h0) == o0, || {
            format!("case {case}: H0 {:?} vs oracle {o0:?}", sorted_pairs(&h0))
        })?;
        check(sorted_pairs(&h1) == o1, || {
            format!("case {case}: H1 {:?} vs oracle {o1:?}", sorted_pairs(&h1))
        })?;
    }
    let square = PointCloud::new(vec![
        vec![0.0, 0.0],
        vec![1.0, 0.0],
        vec![1.0, 1.0],
        vec![0.0, 1.0],
    ])
    .map_err(|e| e.to_string())?;
    let [_, h1] = rips_persistence(&square, MaxScale::Auto).map_err(|e| e.to_string())?;
    check(
        h1.pairs.len() == 1
            && (h1.pairs[0].birth - 1.0).abs() <= 1e-12
            && (h1.pairs[0].death - 2f64.sqrt()).abs() <= 1e-12,
        || format!("unit square H1 {:?}", h1.pairs),
    )?;
    let t = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "500 clouds match the boundary-matrix oracle, unit square (1, √2), {t:.1?}"
    ))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for case in 0..200 {
        let n = rng.random_range(2..=50);
        let dim = rng.random_range(2..=3);
        let points = random_cloud(&mut rng, n, dim);
        let cloud = PointCloud::new(points.clone()).map_err(|e| e.to_string())?;
        let [h0, _] = rips_persistence(&cloud, MaxScale::Auto).map_err(|e| e.to_string())?;
        let mut deaths: Vec<f64> = h0
            .pairs
            .iter()
            .filter(|p| p.is_finite())
            .map(|p| p.death)
            .collect();
        deaths.sort_by(f64::total_cmp);
        let mst = mst_weights(&points);
        check(deaths == mst, || {
            format!("case {case} (n={n}): H0 deaths differ from MST weights")
        })?;
    }
    let t = within(Duration::from_secs(30), start)?;
    Ok(format!(
        "H0 deaths equal Prim MST weights on 200 clouds, {t:.1?}"
    ))
}

fn random_diagram(rng: &mut impl Rng, max_len: usize) -> PersistenceDiagram {
    let len = rng.random_range(1..=max_len);
    let pairs = (0..len)
        .map(|_| {
            let b: f64 = rng.random_range(0.0..1.0);
            PersistencePair::new(b, b + rng.random_range(0.0..1.0))
        })
        .collect();
    PersistenceDiagram::new(1, pairs)
}

fn criterion_3() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let sigma = 0.5;
    let mut worst_sym = 0.0_f64;
    let mut worst_diag = 0.0_f64;
    for _ in 0..100 {
        let f = random_diagram(&mut rng, 8);
        let g = random_diagram(&mut rng, 8);
        let fg = pssk(&f, &g, sigma).map_err(|e| e.to_string())?;
        let gf = pssk(&g, &f, sigma).map_err(|e| e.to_string())?;
        worst_sym = worst_sym.max((fg - gf).abs());
        let mut padded = f.clone();
        for _ in 0..rng.random_range(1..=3) {
            let a = rng.random_range(0.0..2.0);
            padded.pairs.push(PersistencePair::new(a, a));
        }
        let pg = pssk(&padded, &g, sigma).map_err(|e| e.to_string())?;
        worst_diag = worst_diag.max((pg - fg).abs());
    }
    check(worst_sym <= 1e-12, || {
        format!("symmetry error {worst_sym:e}")
    })?;
    check(worst_diag <= 1e-12, || {
        format!("diagonal invariance error {worst_diag:e}")
    })?;
    for set in 0..10 {
        let diagrams: Vec<PersistenceDiagram> =
            (0..20).map(|_| random_diagram(&mut rng, 6)).collect();
        let gram = pssk_gram(&diagrams, sigma).map_err(|e| e.to_string())?;
        check(psd_ok(&gram, 1e-8), || format!("Gram set {set} is not PSD"))?;
    }
    let single = PersistenceDiagram::new(1, vec![PersistencePair::new(0.0, 1.0)]);
    let v = pssk(&single, &single, 0.5).map_err(|e| e.to_string())?;
    let closed = (1.0 - (-0.5f64).exp()) / (4.0 * std::f64::consts::PI);
    check((v - closed).abs() <= 1e-9, || {
        format!("self-kernel {v} vs closed form {closed}")
    })?;
    Ok(format!(
        "symmetry {worst_sym:.1e}, diagonal {worst_diag:.1e}, 10 Gram sets PSD, self-kernel {v:.6}"
    ))
}

/// Stationarity residual of min ‖x_t − Xa‖² + λ‖a‖₁, a ≥ 0, a_t = 0,
/// recomputed from scratch.
fn lasso_kkt(x: &DMatrix<f64>, target: usize, a: &[f64], lambda: f64) -> f64 {
    let (n, k) = x.shape();
    let r: Vec<f64> = (0..n)
        .map(|s| x[(s, target)] - (0..k).map(|j| x[(s, j)] * a[j]).sum::<f64>())
        .collect();
    let mut worst = 0.0_f64;
    for j in (0..k).filter(|&j| j != target) {
        let g = -2.0 * (0..n).map(|s| x[(s, j)] * r[s]).sum::<f64>() + lambda;
        worst = worst.max(if a[j] > 0.0 { g.abs() } else { (-g).max(0.0) });
    }
    worst
}

fn unit_columns(rng: &mut impl Rng, n: usize, k: usize) -> DMatrix<f64> {
    let mut x = DMatrix::from_fn(n, k, |_, _| rng.sample::<f64, _>(StandardNormal));
    for mut c in x.column_iter_mut() {
        let norm = c.norm();
        c /= norm;
    }
    x
}

fn criterion_4() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut worst = 0.0_f64;
    let mut sweeps = 0;
    for case in 0..200 {
        let k = rng.random_range(2..=50);
        let n = rng.random_range(5..=80);
        let x = unit_columns(&mut rng, n, k);
        let target = rng.random_range(0..k);
        let cfg = SolverConfig {
            lambda: rng.random_range(0.01..1.0),
            ..SolverConfig::default()
        };
        let code = solve_nonneg_lasso(&x, target, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let a = &code.coefficients;
        check(a[target] == 0.0 && a.iter().all(|&v| v >= 0.0), || {
            format!("case {case}: infeasible {a:?}")
        })?;
        let kkt = lasso_kkt(&x, target, a, cfg.lambda);
        worst = worst.max(kkt);
        check(kkt <= 1e-6, || {
            format!("case {case} (K={k}, N={n}): KKT residual {kkt:e}")
        })?;
        for w in code.sweep_objectives.windows(2) {
            // exact coordinate minimization cannot increase the objective; allow rounding only
            check(w[1] <= w[0] + 1e-12 * w[0].abs().max(1.0), || {
                format!("case {case}: objective rose from {} to {}", w[0], w[1])
            })?;
        }
        sweeps += code.sweep_objectives.len() - 1;
    }
    let mut x = unit_columns(&mut rng, 40, 10);
    let dup = x.column(3).clone_owned();
    x.set_column(7, &dup);
    let lambda = 0.1;
    let code = solve_nonneg_lasso(
        &x,
        3,
        &SolverConfig {
            lambda,
            ..SolverConfig::default()
        },
    )
    .map_err(|e| e.to_string())?;
    let expected = 1.0 - lambda / 2.0;
    check((code.coefficients[7] - expected).abs() <= 1e-6, || {
        format!(
            "duplicate column coefficient {} vs {expected}",
            code.coefficients[7]
        )
    })?;
    Ok(format!(
        "worst KKT residual {worst:.3e} over 200 instances, {sweeps} monotone sweeps, duplicate column {:.7}",
        code.coefficients[7]
    ))
}

fn graph_families(rng: &mut impl Rng) -> Vec<(&'static str, Vec<LabeledGraph>)> {
    let er: Vec<LabeledGraph> = (0..6)
        .map(|_| {
            let n = rng.random_range(8..=14);
            let edges: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                .filter(|_| rng.random_bool(0.3))
                .collect();
            LabeledGraph::from_edges(n, &edges).unwrap()
        })
        .collect();
    let n = 10;
    let cycle: Vec<(usize, usize)> = (0..n).map(|i| (i, (i + 1) % n)).collect();
    let path: Vec<(usize, usize)> = (0..n - 1).map(|i| (i, i + 1)).collect();
    let star: Vec<(usize, usize)> = (1..n).map(|i| (0, i)).collect();
    let ladder: Vec<(usize, usize)> = (0..5)
        .flat_map(|i| {
            let mut e = vec![(i, i + 5)];
            if i < 4 {
                e.push((i, i + 1));
                e.push((i + 5, i + 6));
            }
            e
        })
        .collect();
    let structured = [cycle, path, star, ladder]
        .iter()
        .map(|e| LabeledGraph::from_edges(n, e).unwrap())
        .collect();
    let cohort = generate_synthetic_cohort(9, 6, 12, 100).unwrap();
    let thresholded = cohort
        .subjects()
        .iter()
        .map(|s| {
            let m = normalize_unit_interval(&pearson_similarity(&s.data)).unwrap();
            binarize(&m, 0.5).unwrap()
        })
        .collect();
    vec![
        ("erdos-renyi", er),
        ("structured", structured),
        ("thresholded", thresholded),
    ]
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let h = 3;
    for (name, graphs) in graph_families(&mut rng) {
        let (wl, _) = wl_kernel(&graphs, h);
        let sp = sp_kernel(&graphs);
        for trial in 0..100 {
            let permuted: Vec<LabeledGraph> = graphs
                .iter()
                .map(|g| {
                    let mut perm: Vec<usize> = (0..g.node_count()).collect();
                    perm.shuffle(&mut rng);
                    g.permuted(&perm).unwrap()
                })
                .collect();
            check(wl_kernel(&permuted, h).0.values == wl.values, || {
                format!("{name}: WL kernel changed under permutation {trial}")
            })?;
            check(sp_kernel(&permuted).values == sp.values, || {
                format!("{name}: SP kernel changed under permutation {trial}")
            })?;
        }
        let mut labeler = WlLabeler::new();
        for g in &graphs {
            let f = labeler.features(g, h);
            check(f.total() == g.node_count() * (h + 1), || {
                format!("{name}: WL counts {} for n={}", f.total(), g.node_count())
            })?;
        }
        check(psd_ok(&wl.values, 1e-8) && psd_ok(&sp.values, 1e-8), || {
            format!("{name}: Gram matrix not PSD")
        })?;
    }
    Ok("WL and SP invariant under 100 permutations in 3 families, counts n(h+1), Grams PSD".into())
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let cfg = SvmConfig::default();
    let mut worst = 0.0_f64;
    for case in 0..50 {
        let n = 10;
        let k = if case % 2 == 0 {
            let rank = rng.random_range(2..=10);
            random_psd(&mut rng, n, rank)
        } else {
            let pts = random_cloud(&mut rng, n, 3);
            DMatrix::from_fn(n, n, |i, j| (-dist(&pts[i], &pts[j]).powi(2)).exp())
        };
        let y = random_labels(&mut rng, n);
        let model = train_svm(&k, &y, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let a = &model.alphas;
        check(a.iter().all(|&v| (0.0..=cfg.c).contains(&v)), || {
            format!("case {case}: alpha outside box {a:?}")
        })?;
        let balance: f64 = a.iter().zip(&y).map(|(a, y)| a * y).sum();
        check(balance.abs() <= 1e-8, || {
            format!("case {case}: sum(alpha*y) = {balance:e}")
        })?;
        let gap = svm_kkt_gap(&k, &y, a, cfg.c);
        check(gap <= cfg.tol + 1e-9, || {
            format!("case {case}: KKT gap {gap:e}")
        })?;
        let oracle = qp_oracle(&k, &y, cfg.c, 100_000);
        let (ours, theirs) = (dual_value(&k, &y, a), dual_value(&k, &y, &oracle));
        let rel = (ours - theirs).abs() / theirs.abs().max(1e-12);
        worst = worst.max(rel);
        check(rel <= 1e-4, || {
            format!("case {case}: dual {ours} vs oracle {theirs} (rel {rel:e})")
        })?;
    }
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!(
        "worst relative dual gap {worst:.1e} on 50 problems, feasibility holds, {t:.1?}"
    ))
}

fn run_pipeline(dir: &Path, cfg: &RunConfig) -> Result<FeatureEvaluation, String> {
    let cohort = load_manifest(cfg.manifest.as_ref().unwrap()).map_err(|e| e.to_string())?;
    let mut results = pipeline::evaluate(cfg, &cohort, None).map_err(|e| e.to_string())?;
    let (path, eval) = results.pop().unwrap();
    check(path.starts_with(dir), || {
        format!("report written outside {}", dir.display())
    })?;
    Ok(eval)
}

fn synthetic_config(dir: &Path) -> Result<RunConfig, String> {
    let cohort = generate_synthetic_cohort(1, 30, 12, 200).map_err(|e| e.to_string())?;
    let manifest = write_cohort(&cohort, dir).map_err(|e| e.to_string())?;
    Ok(RunConfig {
        manifest: Some(manifest),
        out_dir: dir.to_path_buf(),
        ..RunConfig::default()
    })
}

fn criterion_7() -> Outcome {
    let start = Instant::now();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = synthetic_config(dir.path())?;
    check(
        cfg.method == Method::Correlation && cfg.threshold == 0.5 && cfg.wl_h == 3,
        || "default config drifted from correlation / 0.5 / h=3".into(),
    )?;
    let eval = run_pipeline(dir.path(), &cfg)?;
    let wl = eval
        .graph
        .iter()
        .find(|r| r.kernel == "wl(h=3)")
        .ok_or("no WL report")?;
    check(wl.accuracy >= 90.0, || {
        format!("WL LOO accuracy {}", wl.accuracy_display)
    })?;
    let first =
        std::fs::read(dir.path().join("reports/correlation.json")).map_err(|e| e.to_string())?;
    std::fs::remove_dir_all(dir.path().join("graphs")).map_err(|e| e.to_string())?;
    run_pipeline(dir.path(), &cfg)?;
    let second =
        std::fs::read(dir.path().join("reports/correlation.json")).map_err(|e| e.to_string())?;
    check(first == second, || "reports differ between runs".into())?;
    let t = within(Duration::from_secs(60), start)?;
    Ok(format!(
        "WL (h=3) LOO accuracy {}%, two runs bit-identical, {t:.1?}",
        wl.accuracy_display
    ))
}

fn criterion_8() -> Outcome {
    check(matches!(bin_ados(8), Ok(SeverityClass::Mild)), || {
        "ADOS 8 is not mild".into()
    })?;
    check(matches!(bin_ados(9), Ok(SeverityClass::Moderate)), || {
        "ADOS 9 is not moderate".into()
    })?;
    check(matches!(bin_ados(13), Ok(SeverityClass::Moderate)), || {
        "ADOS 13 is not moderate".into()
    })?;
    check(matches!(bin_ados(14), Ok(SeverityClass::Severe)), || {
        "ADOS 14 is not severe".into()
    })?;
    let p = PersistenceParams::default();
    check(p.m == 2 && p.tau == 3, || {
        format!("embedding defaults m={} tau={}", p.m, p.tau)
    })?;
    check(
        format_accuracy(32, 58) == "55.17" && format_accuracy(14, 28) == "50.00",
        || "accuracy formatting does not match the two-decimal table layout".into(),
    )?;
    let k111 = SimilarityMatrix::new(DMatrix::zeros(111, 111), Method::Correlation);
    check(vectorize_upper(&k111).len() == 6105, || {
        "K=111 upper triangle is not 6105 long".into()
    })?;

    let Ok(manifest) = std::env::var("BRAINKERNEL_ABIDE_MANIFEST") else {
        return Ok("protocol constants verified; ABIDE run not CI-gated (set BRAINKERNEL_ABIDE_MANIFEST to run)".into());
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cohort = load_manifest(&manifest).map_err(|e| e.to_string())?;
    check(cohort.regions() == 111, || {
        format!("expected K = 111 regions, got {}", cohort.regions())
    })?;
    let cfg = RunConfig {
        manifest: Some(manifest.into()),
        out_dir: dir.path().to_path_buf(),
        ..RunConfig::default()
    };
    let eval = pipeline::evaluate(&cfg, &cohort, None).map_err(|e| e.to_string())?;
    let table = pipeline::render_table(&[eval[0].1.clone()]);
    Ok(format!(
        "ABIDE run on {} subjects (documentation target: correlation graph kernel 55.17 on USM, L=58):\n{table}",
        cohort.len()
    ))
}

fn criterion_9() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let cfg = synthetic_config(dir.path())?;
    let mut rows = Vec::new();
    for method in [
        Method::Correlation,
        Method::Rbf,
        Method::PcaRbf,
        Method::L1Graph,
    ] {
        let eval = run_pipeline(
            dir.path(),
            &RunConfig {
                method,
                ..cfg.clone()
            },
        )?;
        check(!eval.graph.is_empty(), || {
            format!("{method}: no graph-kernel accuracy")
        })?;
        check(eval.traditional.total == 30, || {
            format!("{method}: no traditional accuracy")
        })?;
        rows.push(eval);
    }
    let default = &rows[0];
    check(
        default.graph_accuracy() >= default.traditional_accuracy(),
        || {
            format!(
                "default config: graph {} < traditional {}",
                default.best_graph_report().accuracy_display,
                default.traditional.accuracy_display
            )
        },
    )?;
    let summary: Vec<String> = rows
        .iter()
        .map(|e| {
            format!(
                "{} {} vs {}",
                e.feature,
                e.traditional.accuracy_display,
                e.best_graph_report().accuracy_display
            )
        })
        .collect();
    Ok(format!("traditional vs graph: {}", summary.join("; ")))
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 9] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
    ];
    let mut failed = 0;
    for (id, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            Err(format!(
                "panicked: {:?}",
                p.downcast_ref::<String>()
                    .map(String::as_str)
                    .or(p.downcast_ref::<&str>().copied())
            ))
        });
        match outcome {
            Ok(detail) => println!("criterion {id}: PASS  {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {id}: FAIL  {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
    println!("all 9 acceptance criteria passed");
}
