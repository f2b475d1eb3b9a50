//! Command-line driver: synthetic data generation, co-spectrum
//! preprocessing, the benchmark protocol, single-target adaptation and
//! model-inspection tables.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use gopsa_core::benchmark::{
    default_lambda_grid, emit_tables, inspect_sites, nested_cv_lambda, run_benchmark_on,
    write_alphas_csv, write_psd_csv, BenchmarkConfig, DataSource, Method, SiteCombination,
};
use gopsa_core::dataio::{
    generate_synthetic, load_cross_spectral_dataset, load_dataset_with, save_dataset, LoadOptions,
    Recording, RecordingSet, SynthConfig,
};
use gopsa_core::gopsa::{adapt_and_predict, sigmoid, train, OptimizerConfig};
use gopsa_core::preprocess::preprocess_recording;

#[derive(Parser)]
#[command(
    name = "gopsa",
    about = "Multi-source test-time domain adaptation for regression on SPD covariance matrices",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic multi-domain dataset with a controllable joint
    /// shift in features and outcome.
    Synth(SynthArgs),
    /// Convert cross-spectral tensors into SPD co-spectra (CAR, real part,
    /// global-scale-factor correction, shrinkage).
    Preprocess(PreprocessArgs),
    /// Run the full benchmark protocol and write the report tables.
    Benchmark(BenchmarkArgs),
    /// Fit on source sites, adapt to one target site, print predictions.
    Adapt(AdaptArgs),
    /// Fit on source sites and emit the per-site alpha and log-spectrum
    /// tables.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 5)]
    dim: usize,
    #[arg(long, default_value_t = 3)]
    n_freqs: usize,
    #[arg(long, default_value_t = 4)]
    domains: usize,
    #[arg(long, default_value_t = 40)]
    per_domain: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Per-domain age ranges as "min:max,min:max,...". Defaults to staggered
    /// ranges 20:40, 32:52, ...
    #[arg(long)]
    age_ranges: Option<String>,
    #[arg(long, default_value_t = 0.15)]
    intercept_strength: f64,
    #[arg(long, default_value_t = 25.0)]
    signal_strength: f64,
    #[arg(long, default_value_t = 0.05)]
    noise_sigma: f64,
}

#[derive(Args)]
struct PreprocessArgs {
    /// Cross-spectral dataset directory (complex payloads).
    #[arg(long)]
    input: PathBuf,
    /// Output SPD dataset directory.
    #[arg(long)]
    out: PathBuf,
    /// Shrinkage coefficient applied after the global-scale-factor step.
    #[arg(long, default_value_t = 1e-5)]
    shrinkage: f64,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// TOML benchmark configuration; explicit flags below override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset directory (alternative to a config file).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Apply trace-scaled shrinkage to every slice on load.
    #[arg(long)]
    shrink_on_load: Option<f64>,
    /// Comma-separated source sites.
    #[arg(long)]
    sources: Option<String>,
    /// Comma-separated target sites (default: all remaining sites).
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    n_splits: Option<usize>,
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Comma-separated ridge penalties (default: 7-point log grid 1e-1..1e5).
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    inner_folds: Option<usize>,
    /// Comma-separated subset of dummy,noda,recenter,dointercept,gopsa.
    #[arg(long)]
    methods: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory for the report tables.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AdaptArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    shrink_on_load: Option<f64>,
    /// Comma-separated source sites.
    #[arg(long)]
    sources: String,
    /// Target site to adapt to.
    #[arg(long)]
    target: String,
    /// Known target mean outcome; defaults to the mean of the target labels.
    #[arg(long)]
    ybar: Option<f64>,
    /// Fixed ridge penalty; selected by nested CV on the sources when absent.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the fitted model document here.
    #[arg(long)]
    save_model: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    shrink_on_load: Option<f64>,
    #[arg(long)]
    sources: String,
    #[arg(long)]
    targets: Option<String>,
    /// Methods to inspect (default: noda,recenter,gopsa).
    #[arg(long, default_value = "noda,recenter,gopsa")]
    methods: String,
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long, default_value_t = 3)]
    inner_folds: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Synth(args) => cmd_synth(args),
        Command::Preprocess(args) => cmd_preprocess(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Adapt(args) => cmd_adapt(args),
        Command::Inspect(args) => cmd_inspect(args),
    }
}

fn parse_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect()
}

fn parse_age_ranges(raw: &str) -> Result<Vec<(f64, f64)>> {
    raw.split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .with_context(|| format!("age range {pair:?} must look like min:max"))?;
            Ok((lo.trim().parse()?, hi.trim().parse()?))
        })
        .collect()
}

fn parse_methods(raw: &str) -> Result<Vec<Method>> {
    parse_list(raw)
        .iter()
        .map(|m| m.parse::<Method>().map_err(Into::into))
        .collect()
}

fn parse_lambdas(raw: &str) -> Result<Vec<f64>> {
    parse_list(raw)
        .iter()
        .map(|l| l.parse::<f64>().with_context(|| format!("bad lambda {l:?}")))
        .collect()
}

fn cmd_synth(args: SynthArgs) -> Result<ExitCode> {
    let age_ranges = match &args.age_ranges {
        Some(raw) => parse_age_ranges(raw)?,
        None => (0..args.domains)
            .map(|k| (20.0 + 12.0 * k as f64, 40.0 + 12.0 * k as f64))
            .collect(),
    };
    let cfg = SynthConfig {
        d: args.dim,
        n_freqs: args.n_freqs,
        n_domains: args.domains,
        n_per_domain: args.per_domain,
        seed: args.seed,
        age_ranges,
        intercept_strength: args.intercept_strength,
        signal_strength: args.signal_strength,
        noise_sigma: args.noise_sigma,
    };
    let sets = generate_synthetic(&cfg)?;
    save_dataset(&sets, &cfg.freqs(), &args.out)?;
    eprintln!(
        "wrote {} domains x {} recordings to {}",
        cfg.n_domains,
        cfg.n_per_domain,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_preprocess(args: PreprocessArgs) -> Result<ExitCode> {
    let domains = load_cross_spectral_dataset(&args.input)?;
    let mut sets = Vec::new();
    let mut freqs = None;
    for domain in &domains {
        let recordings = domain
            .recordings
            .iter()
            .map(|rec| {
                let out = preprocess_recording(&rec.tensor, args.shrinkage)
                    .map_err(|e| anyhow::anyhow!("{}/{}: {e}", domain.domain_id, rec.subject_id))?;
                if freqs.is_none() {
                    freqs = Some(out.freqs.clone());
                }
                Ok(Recording {
                    subject_id: rec.subject_id.clone(),
                    slices: out.slices,
                    age: rec.age,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        sets.push(RecordingSet::new(domain.domain_id.clone(), recordings)?);
    }
    let freqs = freqs.context("no recordings to preprocess")?;
    save_dataset(&sets, &freqs, &args.out)?;
    eprintln!(
        "preprocessed {} domains into {}",
        sets.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_benchmark(args: BenchmarkArgs) -> Result<ExitCode> {
    let mut cfg: BenchmarkConfig = match &args.config {
        Some(path) => {
            let raw = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            toml::from_str(&raw).with_context(|| format!("parsing {}", path.display()))?
        }
        None => {
            let dataset = args
                .dataset
                .clone()
                .context("either --config or --dataset is required")?;
            BenchmarkConfig {
                data: DataSource::Directory {
                    path: dataset,
                    shrink_on_load: args.shrink_on_load,
                },
                combinations: vec![],
                n_splits: 100,
                test_fraction: 0.5,
                lambda_grid: default_lambda_grid(),
                inner_cv_folds: 3,
                methods: Method::ALL.to_vec(),
                seed: 0,
                optimizer: OptimizerConfig::default(),
            }
        }
    };

    // Explicit flags override the config file.
    if let Some(dataset) = args.dataset {
        cfg.data = DataSource::Directory {
            path: dataset,
            shrink_on_load: args.shrink_on_load,
        };
    }
    if let Some(sources) = &args.sources {
        cfg.combinations = vec![SiteCombination {
            sources: parse_list(sources),
            targets: args.targets.as_deref().map(parse_list).unwrap_or_default(),
        }];
    }
    if let Some(n) = args.n_splits {
        cfg.n_splits = n;
    }
    if let Some(f) = args.test_fraction {
        cfg.test_fraction = f;
    }
    if let Some(grid) = &args.lambda_grid {
        cfg.lambda_grid = parse_lambdas(grid)?;
    }
    if let Some(k) = args.inner_folds {
        cfg.inner_cv_folds = k;
    }
    if let Some(methods) = &args.methods {
        cfg.methods = parse_methods(methods)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if cfg.combinations.is_empty() {
        bail!("no site combinations: pass --sources or list them in the config file");
    }

    let (data, freqs) = cfg.data.load()?;
    let report = run_benchmark_on(&data, &freqs, &cfg)?;
    emit_tables(&report, &args.out)?;
    eprintln!(
        "wrote {} metric records, {} t-tests to {}",
        report.records.len(),
        report.ttests.len(),
        args.out.display()
    );
    if report.has_failures() {
        for f in &report.failures {
            eprintln!(
                "failed cell: combination={} split={:?} method={}: {}",
                f.combination_id, f.split_id, f.method, f.message
            );
        }
        return Ok(ExitCode::FAILURE);
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_adapt(args: AdaptArgs) -> Result<ExitCode> {
    let (data, _) = load_dataset_with(
        &args.dataset,
        &LoadOptions {
            shrink: args.shrink_on_load,
        },
    )?;
    let source_ids = parse_list(&args.sources);
    let sources: Vec<RecordingSet> = source_ids
        .iter()
        .map(|id| {
            data.iter()
                .find(|s| s.domain_id() == id)
                .cloned()
                .with_context(|| format!("source site {id} not in dataset"))
        })
        .collect::<Result<_>>()?;
    let target = data
        .iter()
        .find(|s| s.domain_id() == args.target)
        .cloned()
        .with_context(|| format!("target site {} not in dataset", args.target))?;
    if source_ids.iter().any(|id| *id == args.target) {
        bail!("target site {} is also a source", args.target);
    }

    let optimizer = OptimizerConfig::default();
    let lambda = match args.lambda {
        Some(l) => l,
        None => nested_cv_lambda(
            &sources,
            Method::Gopsa,
            &default_lambda_grid(),
            3,
            args.seed,
            &optimizer,
        )?,
    };
    let model = train(&sources, lambda, &optimizer)?;
    let ybar = match args.ybar {
        Some(y) => y,
        None => target
            .mean_age()
            .context("target has no labels; pass --ybar")?,
    };
    let (adaptation, predictions) = adapt_and_predict(&target, ybar, &model, &optimizer)?;

    if let Some(path) = &args.save_model {
        model.save(path)?;
        eprintln!("model written to {}", path.display());
    }
    eprintln!(
        "lambda={lambda} gamma_t={} alpha_t={} mean_error={}{}",
        adaptation.gamma_target,
        sigmoid(adaptation.gamma_target),
        adaptation.achieved_mean_error,
        if adaptation.non_identifiable {
            " (non-identifiable: flat adaptation loss)"
        } else {
            ""
        }
    );
    println!("subject_id,prediction,age");
    for (rec, pred) in target.recordings().iter().zip(&predictions) {
        println!(
            "{},{},{}",
            rec.subject_id,
            pred,
            rec.age.map(|a| a.to_string()).unwrap_or_default()
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_inspect(args: InspectArgs) -> Result<ExitCode> {
    let (data, freqs) = load_dataset_with(
        &args.dataset,
        &LoadOptions {
            shrink: args.shrink_on_load,
        },
    )?;
    let combo = SiteCombination {
        sources: parse_list(&args.sources),
        targets: args.targets.as_deref().map(parse_list).unwrap_or_default(),
    };
    let cfg = BenchmarkConfig {
        data: DataSource::Directory {
            path: args.dataset.clone(),
            shrink_on_load: args.shrink_on_load,
        },
        combinations: vec![combo.clone()],
        n_splits: 1,
        test_fraction: 0.5,
        lambda_grid: match &args.lambda_grid {
            Some(grid) => parse_lambdas(grid)?,
            None => default_lambda_grid(),
        },
        inner_cv_folds: args.inner_folds,
        methods: parse_methods(&args.methods)?,
        seed: args.seed,
        optimizer: OptimizerConfig::default(),
    };
    let (alphas, psd) = inspect_sites(&data, &freqs, &combo, &cfg)?;
    std::fs::create_dir_all(&args.out)?;
    write_alphas_csv(&alphas, &args.out.join("alphas.csv"))?;
    write_psd_csv(&psd, &args.out.join("psd.csv"))?;
    eprintln!(
        "wrote {} alpha rows and {} spectrum rows to {}",
        alphas.len(),
        psd.len(),
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}
