use std::path::PathBuf;
use std::process::ExitCode;

use agcsc_core::experiment::{DEFAULT_M_GRID, DEFAULT_PARAMETER_GRID};
use agcsc_core::{run_experiment, DataSource, ExperimentConfig, MatrixFormat, SyntheticSpec};
use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Parser};

/// Run AGCSC / TAGCSC over a grid of regularization parameters and write
/// per-run scores, solver traces and a summary to an output directory.
#[derive(Debug, Parser)]
#[command(name = "agcsc", version)]
#[command(group(ArgGroup::new("input").required(true).args(["data", "synthetic"])))]
struct Args {
    /// Sample matrix, one sample per row.
    #[arg(long, requires = "labels")]
    data: Option<PathBuf>,

    /// Ground-truth labels, one integer per line.
    #[arg(long)]
    labels: Option<PathBuf>,

    /// Format of --data: csv or raw-binary.
    #[arg(long, default_value = "csv")]
    format: MatrixFormat,

    /// Divide every entry of --data by 255.
    #[arg(long)]
    normalize_pixels: bool,

    /// Generate a union of subspaces instead of reading files:
    /// k,n_per,d,r,sigma.
    #[arg(long, value_name = "K,N_PER,D,R,SIGMA")]
    synthetic: Option<String>,

    /// Seed for synthetic data; defaults to --seed.
    #[arg(long)]
    data_seed: Option<u64>,

    /// Number of clusters; defaults to the number of ground-truth classes.
    #[arg(long)]
    k: Option<usize>,

    /// Comma-separated alpha values [default: 1e-5,1e-4,1e-3,5e-3,0.01,0.05,0.1,0.5].
    #[arg(long, value_parser = parse_floats)]
    alpha_grid: Option<Floats>,

    /// Comma-separated beta values [default: same as alpha].
    #[arg(long, value_parser = parse_floats)]
    beta_grid: Option<Floats>,

    /// Comma-separated m values for thresholding, or "none" for plain
    /// AGCSC only [default: 4,5,6,7,8,9,10].
    #[arg(long, value_parser = parse_counts)]
    m_grid: Option<Counts>,

    /// Seed for k-means initialization (and synthetic data).
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Output directory; created if missing.
    #[arg(long)]
    out: PathBuf,

    /// Stopping tolerance on both constraint residuals [default: 1e-7].
    #[arg(long)]
    epsilon: Option<f64>,

    /// Iteration cap per solve [default: 1000].
    #[arg(long)]
    max_iter: Option<usize>,

    /// Worker threads for the grid; results do not depend on this.
    #[arg(long, default_value_t = 1)]
    workers: usize,

    /// Leave the seconds column of records.csv empty so reruns are
    /// byte-identical.
    #[arg(long)]
    no_timing: bool,

    /// Also write C* and F* for every grid point (raw binary).
    #[arg(long)]
    save_matrices: bool,
}

// Whole comma lists are one argument value; a bare Vec field would make
// clap treat each element as a separate occurrence.
#[derive(Debug, Clone)]
struct Floats(Vec<f64>);

#[derive(Debug, Clone)]
struct Counts(Vec<usize>);

fn parse_floats(text: &str) -> Result<Floats, String> {
    text.split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Floats)
}

fn parse_counts(text: &str) -> Result<Counts, String> {
    let text = text.trim();
    if text.is_empty() || text.eq_ignore_ascii_case("none") {
        return Ok(Counts(Vec::new()));
    }
    text.split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| format!("{s:?}: {e}")))
        .collect::<Result<_, _>>()
        .map(Counts)
}

fn parse_synthetic(text: &str, seed: u64) -> Result<SyntheticSpec> {
    let parts: Vec<&str> = text.split(',').map(str::trim).collect();
    if parts.len() != 5 {
        bail!("--synthetic expects k,n_per,d,r,sigma, got {text:?}");
    }
    let int = |i: usize, name: &str| {
        parts[i]
            .parse::<usize>()
            .with_context(|| format!("--synthetic {name}: {:?}", parts[i]))
    };
    let spec = SyntheticSpec {
        k: int(0, "k")?,
        n_per: int(1, "n_per")?,
        d: int(2, "d")?,
        r: int(3, "r")?,
        sigma: parts[4]
            .parse()
            .with_context(|| format!("--synthetic sigma: {:?}", parts[4]))?,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

fn build_config(args: Args) -> Result<ExperimentConfig> {
    let source = match (&args.synthetic, &args.data, &args.labels) {
        (Some(text), _, _) => {
            DataSource::Synthetic(parse_synthetic(text, args.data_seed.unwrap_or(args.seed))?)
        }
        (None, Some(data), Some(labels)) => DataSource::Files {
            data: data.clone(),
            labels: labels.clone(),
            format: args.format,
            normalize_pixels: args.normalize_pixels,
        },
        _ => bail!("either --synthetic or both --data and --labels are required"),
    };
    let mut config = ExperimentConfig::new(source, args.out);
    config.k = args.k;
    config.alpha_grid = args
        .alpha_grid
        .map_or(DEFAULT_PARAMETER_GRID.to_vec(), |g| g.0);
    config.beta_grid = args
        .beta_grid
        .map_or(DEFAULT_PARAMETER_GRID.to_vec(), |g| g.0);
    config.m_grid = args.m_grid.map_or(DEFAULT_M_GRID.to_vec(), |g| g.0);
    config.seed = args.seed;
    config.workers = args.workers;
    config.record_timing = !args.no_timing;
    config.save_matrices = args.save_matrices;
    if let Some(epsilon) = args.epsilon {
        config.solver.epsilon = epsilon;
    }
    if let Some(max_iter) = args.max_iter {
        config.solver.max_iter = max_iter;
    }
    Ok(config)
}

fn run(args: Args) -> Result<bool> {
    let config = build_config(args)?;
    let outcome = run_experiment(&config).context("experiment failed")?;
    let describe = |i: usize| {
        let r = &outcome.records[i];
        let m = r.m.map_or("-".to_string(), |m| m.to_string());
        format!(
            "acc {:.4} nmi {:.4} (alpha {}, beta {}, m {m})",
            r.acc, r.nmi, r.alpha, r.beta
        )
    };
    println!(
        "{} grid points, {} records, {} failed",
        outcome.solves,
        outcome.records.len(),
        outcome.failures.len()
    );
    if let Some(i) = outcome.best_acc {
        println!("best acc: {}", describe(i));
    }
    if let Some(i) = outcome.best_nmi {
        println!("best nmi: {}", describe(i));
    }
    for f in &outcome.failures {
        eprintln!("alpha {} beta {}: {}", f.alpha, f.beta, f.message);
    }
    println!("results in {}", config.output_dir.display());
    Ok(outcome.succeeded())
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
