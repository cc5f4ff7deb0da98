//! Grid sweeps over `(alpha, beta)` and the threshold `m`, with csv/json
//! artifacts.
//!
//! Layout of the output directory:
//!
//! ```text
//! manifest.json        resolved configuration and data shape
//! records.csv          alpha,beta,m,acc,nmi,iters,converged,seconds
//! summary.csv          grid points with the best ACC and the best NMI
//! failures.csv         only when some grid point failed
//! traces/trace_aIII_bJJJ.csv
//! matrices/{C,F}_aIII_bJJJ.bin   only with `save_matrices`
//! ```
//!
//! Grid order is alpha outer, beta inner, m innermost, and all files are
//! written in that order whatever the worker count.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{
    generate_union_of_subspaces, load_dense_matrix, load_labels, normalize_pixel_range,
    write_raw_binary, DataMatrix, LabelVector, MatrixFormat, SyntheticSpec,
};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::graph::{affinity_from_coefficients, threshold_m_largest};
use crate::metrics::{accuracy, nmi};
use crate::solver::{solve, SolverConfig, SolverResult};
use crate::spectral::cluster_affinity;

/// Default values swept for both alpha and beta.
pub const DEFAULT_PARAMETER_GRID: [f64; 8] = [1e-5, 1e-4, 1e-3, 5e-3, 0.01, 0.05, 0.1, 0.5];

/// Default thresholds for the m-largest post-processing.
pub const DEFAULT_M_GRID: [usize; 7] = [4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DataSource {
    Files {
        data: PathBuf,
        labels: PathBuf,
        format: MatrixFormat,
        /// Divide every entry by 255.
        normalize_pixels: bool,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    /// Cluster count; defaults to the number of ground-truth classes.
    pub k: Option<usize>,
    pub alpha_grid: Vec<f64>,
    pub beta_grid: Vec<f64>,
    /// Empty runs plain AGCSC only.
    pub m_grid: Vec<usize>,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Schedule and stopping parameters; `alpha` and `beta` are taken from
    /// the grids.
    pub solver: SolverConfig,
    pub workers: usize,
    /// Write wall-clock seconds into `records.csv`. Timing is the only
    /// nondeterministic column, so leave this off for byte-reproducible runs.
    pub record_timing: bool,
    pub save_matrices: bool,
}

impl ExperimentConfig {
    pub fn new(source: DataSource, output_dir: impl Into<PathBuf>) -> Self {
        Self {
            source,
            k: None,
            alpha_grid: DEFAULT_PARAMETER_GRID.to_vec(),
            beta_grid: DEFAULT_PARAMETER_GRID.to_vec(),
            m_grid: DEFAULT_M_GRID.to_vec(),
            seed: 0,
            output_dir: output_dir.into(),
            solver: SolverConfig::default(),
            workers: 1,
            record_timing: true,
            save_matrices: false,
        }
    }

    pub fn grid_points(&self) -> usize {
        self.alpha_grid.len() * self.beta_grid.len()
    }

    fn validate(&self) -> Result<()> {
        if self.alpha_grid.is_empty() || self.beta_grid.is_empty() {
            return Err(Error::InvalidArgument(
                "alpha and beta grids must be nonempty".into(),
            ));
        }
        if self.m_grid.contains(&0) {
            return Err(Error::InvalidArgument(
                "threshold values must be >= 1".into(),
            ));
        }
        if self.workers == 0 {
            return Err(Error::InvalidArgument("worker count must be >= 1".into()));
        }
        if let Some(k) = self.k {
            if k < 2 {
                return Err(Error::InvalidArgument(format!(
                    "need k >= 2 clusters, got {k}"
                )));
            }
        }
        for &alpha in &self.alpha_grid {
            for &beta in &self.beta_grid {
                SolverConfig {
                    alpha,
                    beta,
                    ..self.solver
                }
                .validate()?;
            }
        }
        Ok(())
    }
}

/// Scores of one clustering run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub alpha: f64,
    pub beta: f64,
    /// Threshold for TAGCSC rows, `None` for plain AGCSC.
    pub m: Option<usize>,
    pub acc: f64,
    pub nmi: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Solve plus clustering time.
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridFailure {
    pub alpha: f64,
    pub beta: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutcome {
    pub records: Vec<RunRecord>,
    pub failures: Vec<GridFailure>,
    /// Index into `records` of the best accuracy (first on ties).
    pub best_acc: Option<usize>,
    pub best_nmi: Option<usize>,
    /// Number of solver invocations.
    pub solves: usize,
}

impl ExperimentOutcome {
    pub fn succeeded(&self) -> bool {
        self.failures.is_empty()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a ExperimentConfig,
    samples: usize,
    features: usize,
    classes: usize,
}

/// Loads or synthesizes the data set of an experiment.
pub fn load_source(source: &DataSource) -> Result<(DataMatrix, LabelVector)> {
    match source {
        DataSource::Files {
            data,
            labels,
            format,
            normalize_pixels,
        } => {
            let mut x = load_dense_matrix(data, *format)?;
            if *normalize_pixels {
                x = normalize_pixel_range(&x);
            }
            let labels = load_labels(labels)?;
            if labels.len() != x.n() {
                return Err(Error::DimensionMismatch(format!(
                    "{} labels for {} samples",
                    labels.len(),
                    x.n()
                )));
            }
            Ok((x, labels))
        }
        DataSource::Synthetic(spec) => generate_union_of_subspaces(spec),
    }
}

/// Labels from a coefficient matrix: optional m-largest thresholding, the
/// symmetric affinity, then spectral clustering.
pub fn labels_from_coefficients(
    c: &DMatrix<f64>,
    k: usize,
    m: Option<usize>,
    seed: u64,
) -> Result<LabelVector> {
    let affinity = match m {
        Some(m) => affinity_from_coefficients(&threshold_m_largest(c, m)?)?,
        None => affinity_from_coefficients(c)?,
    };
    cluster_affinity(&affinity, k, seed)
}

struct JobOutput {
    records: Vec<RunRecord>,
    failure: Option<GridFailure>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutcome> {
    config.validate()?;
    let (x, truth) = load_source(&config.source)?;
    let k = config.k.unwrap_or(truth.k());
    if k < 2 || k > x.n() {
        return Err(Error::InvalidArgument(format!(
            "cluster count {k} must lie in 2..={}",
            x.n()
        )));
    }
    let resolved = ExperimentConfig {
        k: Some(k),
        ..config.clone()
    };

    let out = &config.output_dir;
    create_dir(out)?;
    create_dir(&out.join("traces"))?;
    if config.save_matrices {
        create_dir(&out.join("matrices"))?;
    }
    let manifest = Manifest {
        config: &resolved,
        samples: x.n(),
        features: x.d(),
        classes: truth.k(),
    };
    let json =
        serde_json::to_string_pretty(&manifest).map_err(|e| Error::Serialization(e.to_string()))?;
    write_file(&out.join("manifest.json"), json + "\n")?;

    let jobs: Vec<(usize, usize)> = (0..config.alpha_grid.len())
        .flat_map(|a| (0..config.beta_grid.len()).map(move |b| (a, b)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("cannot start worker pool: {e}")))?;
    let outputs: Vec<Result<JobOutput>> = pool.install(|| {
        jobs.par_iter()
            .enumerate()
            .map(|(index, &(a, b))| run_grid_point(config, &x, &truth, k, index, a, b))
            .collect()
    });

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for output in outputs {
        let output = output?;
        records.extend(output.records);
        failures.extend(output.failure);
    }

    let best_by = |score: fn(&RunRecord) -> f64| {
        records
            .iter()
            .enumerate()
            .fold(None, |best: Option<usize>, (i, r)| match best {
                Some(b) if score(&records[b]) >= score(r) => Some(b),
                _ => Some(i),
            })
    };
    let best_acc = best_by(|r| r.acc);
    let best_nmi = best_by(|r| r.nmi);

    write_file(
        &out.join("records.csv"),
        records_csv(&records, config.record_timing),
    )?;
    write_file(
        &out.join("summary.csv"),
        summary_csv(&records, best_acc, best_nmi),
    )?;
    if !failures.is_empty() {
        let mut text = String::from("alpha,beta,error\n");
        for f in &failures {
            let message = f.message.replace(['\n', '"'], " ");
            let _ = writeln!(text, "{},{},\"{}\"", f.alpha, f.beta, message);
        }
        write_file(&out.join("failures.csv"), text)?;
    }

    Ok(ExperimentOutcome {
        records,
        failures,
        best_acc,
        best_nmi,
        solves: jobs.len(),
    })
}

fn run_grid_point(
    config: &ExperimentConfig,
    x: &DataMatrix,
    truth: &LabelVector,
    k: usize,
    index: usize,
    a: usize,
    b: usize,
) -> Result<JobOutput> {
    let alpha = config.alpha_grid[a];
    let beta = config.beta_grid[b];
    let solver = SolverConfig {
        alpha,
        beta,
        ..config.solver
    };
    let job_seed = derive_seed(config.seed, index as u64);
    let failure = |message: String| JobOutput {
        records: Vec::new(),
        failure: Some(GridFailure {
            alpha,
            beta,
            message,
        }),
    };

    let started = Instant::now();
    let result = match solve(x, &solver) {
        Ok(r) => r,
        Err(e) => return Ok(failure(e.to_string())),
    };
    let solve_seconds = started.elapsed().as_secs_f64();

    let stem = format!("a{a:03}_b{b:03}");
    emit_trace(
        &result,
        config
            .output_dir
            .join("traces")
            .join(format!("trace_{stem}.csv")),
    )?;
    if config.save_matrices {
        let dir = config.output_dir.join("matrices");
        write_raw_binary(&result.c, dir.join(format!("C_{stem}.bin")))?;
        write_raw_binary(&result.f, dir.join(format!("F_{stem}.bin")))?;
    }

    let thresholds = std::iter::once(None).chain(config.m_grid.iter().copied().map(Some));
    let mut records = Vec::with_capacity(config.m_grid.len() + 1);
    for (slot, m) in thresholds.enumerate() {
        let started = Instant::now();
        let predicted =
            match labels_from_coefficients(&result.c, k, m, derive_seed(job_seed, slot as u64)) {
                Ok(p) => p,
                Err(e) => return Ok(failure(e.to_string())),
            };
        records.push(RunRecord {
            alpha,
            beta,
            m,
            acc: accuracy(predicted.labels(), truth.labels())?,
            nmi: nmi(predicted.labels(), truth.labels())?,
            iterations: result.iterations,
            converged: result.converged,
            seconds: solve_seconds + started.elapsed().as_secs_f64(),
        });
    }
    Ok(JobOutput {
        records,
        failure: None,
    })
}

fn records_csv(records: &[RunRecord], timing: bool) -> String {
    let mut text = String::from("alpha,beta,m,acc,nmi,iters,converged,seconds\n");
    for r in records {
        let m = r.m.map(|m| m.to_string()).unwrap_or_default();
        let seconds = if timing {
            format!("{:.6}", r.seconds)
        } else {
            String::new()
        };
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{},{}",
            r.alpha, r.beta, m, r.acc, r.nmi, r.iterations, r.converged, seconds
        );
    }
    text
}

fn summary_csv(records: &[RunRecord], best_acc: Option<usize>, best_nmi: Option<usize>) -> String {
    let mut text = String::from("criterion,alpha,beta,m,acc,nmi\n");
    for (name, best) in [("best_acc", best_acc), ("best_nmi", best_nmi)] {
        if let Some(i) = best {
            let r = &records[i];
            let m = r.m.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(
                text,
                "{name},{},{},{m},{},{}",
                r.alpha, r.beta, r.acc, r.nmi
            );
        }
    }
    text
}

/// Writes the per-iteration residual trace of a solve, one row per
/// iteration, with a header line naming the columns.
pub fn emit_trace(result: &SolverResult, path: impl AsRef<Path>) -> Result<()> {
    let mut text =
        String::from("iter,coupling_residual,row_sum_residual,delta_c,delta_f,delta_z\n");
    for (t, rec) in result.history.iter().enumerate() {
        let _ = writeln!(
            text,
            "{},{:e},{:e},{:e},{:e},{:e}",
            t + 1,
            rec.residuals.coupling,
            rec.residuals.row_sum,
            rec.delta_c,
            rec.delta_f,
            rec.delta_z
        );
    }
    write_file(path.as_ref(), text)
}

fn create_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

fn write_file(path: &Path, contents: String) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}
