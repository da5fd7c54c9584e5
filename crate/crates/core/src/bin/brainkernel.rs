use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use brainkernel::data;
use brainkernel::pipeline::{self, KernelChoice, RunConfig};
use brainkernel::similarity::{Gamma, Method};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "brainkernel",
    version,
    about = "Graph kernels for connectivity-based severity classification"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort (manifest + per-subject CSVs) to the output directory.
    Synth {
        #[arg(long, default_value_t = 30)]
        subjects: usize,
        #[arg(long, default_value_t = 12)]
        regions: usize,
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Build normalized per-subject similarity matrices.
    BuildGraphs,
    /// Compute the configured subject×subject kernel.
    ComputeKernel,
    /// Leave-one-out evaluation of the traditional and graph-kernel paths.
    Evaluate {
        /// Evaluate every threshold in a:b:step, one report each.
        #[arg(long, value_name = "A:B:STEP")]
        sweep_threshold: Option<String>,
    },
    /// Print the result table for all reports in the output directory.
    Report,
}

#[derive(Args)]
struct Overrides {
    /// JSON run configuration; flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    manifest: Option<PathBuf>,
    /// correlation, rbf, pca_rbf, l1_graph or persistence.
    #[arg(long, global = true)]
    method: Option<Method>,
    #[arg(long, global = true)]
    no_znormalize: bool,
    /// RBF gamma; omit for the median heuristic.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    #[arg(long, global = true)]
    pca_components: Option<usize>,
    #[arg(long, global = true)]
    threshold: Option<f64>,
    #[arg(long, global = true)]
    density: Option<f64>,
    #[arg(long, global = true)]
    tde_m: Option<usize>,
    #[arg(long, global = true)]
    tde_tau: Option<usize>,
    #[arg(long, global = true)]
    sigma: Option<f64>,
    #[arg(long, global = true)]
    lambda: Option<f64>,
    #[arg(long, global = true)]
    lasso_tol: Option<f64>,
    #[arg(long, global = true)]
    lasso_max_iter: Option<usize>,
    #[arg(long, global = true)]
    wl_h: Option<usize>,
    #[arg(long, global = true)]
    svm_c: Option<f64>,
    #[arg(long, global = true)]
    svm_tol: Option<f64>,
    /// Comma-separated inner-LOO grid over C.
    #[arg(long, global = true, value_delimiter = ',')]
    c_grid: Option<Vec<f64>>,
    /// wl, sp, linear or sum.
    #[arg(long, global = true)]
    kernel: Option<KernelChoice>,
    #[arg(long, global = true, value_delimiter = ',')]
    sum_methods: Option<Vec<Method>>,
    #[arg(long, global = true, value_delimiter = ',')]
    sum_weights: Option<Vec<f64>>,
    /// Skip kernel normalization.
    #[arg(long, global = true)]
    raw_kernels: bool,
}

impl Overrides {
    fn resolve(&self) -> anyhow::Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_json_file(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($field:expr, $value:expr) => {
                if let Some(v) = $value.clone() {
                    $field = v;
                }
            };
        }
        set!(c.out_dir, self.out);
        set!(c.seed, self.seed);
        if self.manifest.is_some() {
            c.manifest = self.manifest.clone();
        }
        set!(c.method, self.method);
        if self.no_znormalize {
            c.znormalize = false;
        }
        if let Some(g) = self.gamma {
            c.rbf_gamma = Gamma::Fixed(g);
        }
        set!(c.pca_components, self.pca_components);
        set!(c.threshold, self.threshold);
        if self.density.is_some() {
            c.density = self.density;
        }
        set!(c.persistence.m, self.tde_m);
        set!(c.persistence.tau, self.tde_tau);
        set!(c.persistence.sigma, self.sigma);
        set!(c.lasso.lambda, self.lambda);
        set!(c.lasso.tol, self.lasso_tol);
        set!(c.lasso.max_iter, self.lasso_max_iter);
        set!(c.wl_h, self.wl_h);
        set!(c.svm.c, self.svm_c);
        set!(c.svm.tol, self.svm_tol);
        set!(c.c_grid, self.c_grid);
        set!(c.kernel, self.kernel);
        set!(c.sum_methods, self.sum_methods);
        set!(c.sum_weights, self.sum_weights);
        if self.raw_kernels {
            c.normalize_kernels = false;
        }
        if c.manifest.is_none() {
            let default = c.out_dir.join("manifest.csv");
            if default.exists() {
                c.manifest = Some(default);
            }
        }
        c.validate()?;
        Ok(c)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = cli.overrides.resolve()?;
    match cli.command {
        Command::Synth {
            subjects,
            regions,
            samples,
        } => {
            let cohort = data::generate_synthetic_cohort(cfg.seed, subjects, regions, samples)?;
            let manifest = data::write_cohort(&cohort, &cfg.out_dir)?;
            log::info!("wrote {} subjects", cohort.len());
            println!("{}", manifest.display());
        }
        Command::BuildGraphs => {
            let cohort = cfg.load_cohort()?;
            for method in cfg.feature_methods() {
                let s = pipeline::build_graphs(&cfg, &cohort, method)
                    .with_context(|| format!("building {method} graphs"))?;
                println!(
                    "{method}: built {} subjects, skipped {} subjects (cached)",
                    s.built, s.skipped
                );
            }
        }
        Command::ComputeKernel => {
            let cohort = cfg.load_cohort()?;
            let (_, meta) = pipeline::compute_kernel(&cfg, &cohort)?;
            println!(
                "{}: {} ({} subjects, eigenvalues in [{:.3e}, {:.3e}])",
                meta.name,
                meta.kind,
                meta.subjects.len(),
                meta.min_eigenvalue,
                meta.max_eigenvalue
            );
        }
        Command::Evaluate { sweep_threshold } => {
            let cohort = cfg.load_cohort()?;
            let sweep = sweep_threshold
                .as_deref()
                .map(pipeline::parse_sweep)
                .transpose()?;
            let results = pipeline::evaluate(&cfg, &cohort, sweep.as_deref())?;
            let evals: Vec<_> = results.iter().map(|(_, e)| e.clone()).collect();
            print!("{}", pipeline::render_table(&evals));
            for (path, _) in &results {
                log::info!("wrote {}", path.display());
            }
        }
        Command::Report => {
            let evals = pipeline::read_reports(&cfg.out_dir)?;
            if evals.is_empty() {
                anyhow::bail!("no reports in {}", cfg.out_dir.join("reports").display());
            }
            print!("{}", pipeline::render_table(&evals));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
