//! Normalized-cuts spectral clustering: embedding by the leading eigenvectors
//! of `D^{-1/2} A D^{-1/2}`, row normalization, then k-means.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::data::LabelVector;
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::graph::Affinity;

/// Rows with norm below this are treated as zero and not normalized.
const ZERO_ROW: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    /// `n x k`, rows of unit norm except those listed in `zero_rows`.
    pub vectors: DMatrix<f64>,
    /// Leading eigenvalues, descending.
    pub eigenvalues: DVector<f64>,
    pub zero_rows: Vec<usize>,
}

/// `D^{-1/2} A D^{-1/2}` with `D = diag(A1)`; zero degrees count as 1.
pub fn normalized_adjacency(a: &Affinity) -> DMatrix<f64> {
    let values = a.values();
    let n = a.n();
    let inv_sqrt: Vec<f64> = values
        .row_iter()
        .map(|r| {
            let d = r.sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    DMatrix::from_fn(n, n, |i, j| values[(i, j)] * inv_sqrt[i] * inv_sqrt[j])
}

pub fn ncuts_embedding(a: &Affinity, k: usize) -> Result<SpectralEmbedding> {
    let n = a.n();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count must be in 1..={n}, got {k}"
        )));
    }
    let eig = SymmetricEigen::new(normalized_adjacency(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&p, &q| {
        eig.eigenvalues[q]
            .total_cmp(&eig.eigenvalues[p])
            .then(p.cmp(&q))
    });
    let order = &order[..k];

    let mut vectors = DMatrix::zeros(n, k);
    for (col, &idx) in order.iter().enumerate() {
        let v = eig.eigenvectors.column(idx);
        // fix the sign so the largest-magnitude entry is positive
        let pivot = v.iamax();
        let sign = if v[pivot] < 0.0 { -1.0 } else { 1.0 };
        vectors.set_column(col, &(v * sign));
    }
    let mut zero_rows = Vec::new();
    for i in 0..n {
        let norm = vectors.row(i).norm();
        if norm < ZERO_ROW {
            vectors.row_mut(i).fill(0.0);
            zero_rows.push(i);
        } else {
            vectors.row_mut(i).unscale_mut(norm);
        }
    }
    Ok(SpectralEmbedding {
        vectors,
        eigenvalues: DVector::from_iterator(k, order.iter().map(|&i| eig.eigenvalues[i])),
        zero_rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iter: usize,
    /// Stop when the objective improves by less than this fraction.
    pub tolerance: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        Self {
            restarts: 20,
            max_iter: 300,
            tolerance: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub labels: LabelVector,
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squared distances.
    pub objective: f64,
    /// Objective after each assignment step of the winning restart.
    pub objective_trace: Vec<f64>,
    /// Index of the winning restart.
    pub restart: usize,
}

/// Best of `restarts` seeded Lloyd runs; rows of `points` are the samples.
pub fn kmeans(points: &DMatrix<f64>, k: usize, seed: u64, restarts: usize) -> Result<KMeansFit> {
    kmeans_with(
        points,
        k,
        seed,
        &KMeansOptions {
            restarts,
            ..KMeansOptions::default()
        },
    )
}

pub fn kmeans_with(
    points: &DMatrix<f64>,
    k: usize,
    seed: u64,
    options: &KMeansOptions,
) -> Result<KMeansFit> {
    let n = points.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "cluster count must be in 1..={n}, got {k}"
        )));
    }
    if options.restarts == 0 {
        return Err(Error::InvalidArgument(
            "k-means needs at least one restart".into(),
        ));
    }
    let runs: Vec<KMeansFit> = (0..options.restarts)
        .into_par_iter()
        .map(|restart| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, restart as u64));
            lloyd(points, k, &mut rng, options, restart)
        })
        .collect();
    // strict comparison: on equal objectives the lower restart index wins
    let best = runs
        .into_iter()
        .reduce(|best, run| {
            if run.objective < best.objective {
                run
            } else {
                best
            }
        })
        .expect("at least one restart");
    Ok(best)
}

fn squared_distance(points: &DMatrix<f64>, i: usize, centroids: &DMatrix<f64>, c: usize) -> f64 {
    points
        .row(i)
        .iter()
        .zip(centroids.row(c).iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Distance-weighted (k-means++) seeding.
fn seed_centroids(points: &DMatrix<f64>, k: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let n = points.nrows();
    let mut chosen = Vec::with_capacity(k);
    chosen.push(rng.random_range(0..n));
    let mut nearest = vec![f64::INFINITY; n];
    while chosen.len() < k {
        let last = *chosen.last().unwrap();
        for (i, best) in nearest.iter_mut().enumerate() {
            let d: f64 = points
                .row(i)
                .iter()
                .zip(points.row(last).iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            *best = best.min(d);
        }
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut pick = None;
            for (i, &w) in nearest.iter().enumerate() {
                if w > 0.0 {
                    pick = Some(i);
                    if target < w {
                        break;
                    }
                    target -= w;
                }
            }
            pick.expect("positive total weight")
        } else {
            // every point coincides with a chosen centre
            (0..n).find(|i| !chosen.contains(i)).expect("k <= n")
        };
        chosen.push(next);
    }
    points.select_rows(&chosen)
}

fn assign(
    points: &DMatrix<f64>,
    centroids: &DMatrix<f64>,
    labels: &mut [usize],
) -> (f64, Vec<f64>) {
    let k = centroids.nrows();
    let mut objective = 0.0;
    let mut dist = vec![0.0; points.nrows()];
    for (i, label) in labels.iter_mut().enumerate() {
        let (best, d) = (0..k)
            .map(|c| (c, squared_distance(points, i, centroids, c)))
            .fold(
                (0, f64::INFINITY),
                |acc, cur| if cur.1 < acc.1 { cur } else { acc },
            );
        *label = best;
        dist[i] = d;
        objective += d;
    }
    (objective, dist)
}

fn lloyd(
    points: &DMatrix<f64>,
    k: usize,
    rng: &mut ChaCha8Rng,
    options: &KMeansOptions,
    restart: usize,
) -> KMeansFit {
    let (n, dim) = points.shape();
    let mut centroids = seed_centroids(points, k, rng);
    let mut labels = vec![0usize; n];
    let (mut objective, mut dist) = assign(points, &centroids, &mut labels);
    let mut trace = vec![objective];

    for _ in 0..options.max_iter {
        let mut sums = DMatrix::zeros(k, dim);
        let mut counts = vec![0usize; k];
        for (i, &l) in labels.iter().enumerate() {
            let mut row = sums.row_mut(l);
            row += points.row(i);
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                centroids.set_row(c, &(sums.row(c) / counts[c] as f64));
            } else {
                // re-seed an empty cluster at the worst-fit point among
                // clusters that can spare one
                let far = (0..n)
                    .filter(|&i| counts[labels[i]] > 1)
                    .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)));
                if let Some(far) = far {
                    counts[labels[far]] -= 1;
                    counts[c] = 1;
                    labels[far] = c;
                    dist[far] = 0.0;
                    centroids.set_row(c, &points.row(far));
                }
            }
        }
        let previous = objective;
        let before = labels.clone();
        (objective, dist) = assign(points, &centroids, &mut labels);
        trace.push(objective);
        if labels == before || previous - objective <= options.tolerance * previous {
            break;
        }
    }

    KMeansFit {
        labels: LabelVector::new(labels, k).expect("labels in 0..k with k <= n"),
        centroids,
        objective,
        objective_trace: trace,
        restart,
    }
}

/// Spectral clustering of an affinity matrix into `k` groups.
pub fn cluster_affinity(a: &Affinity, k: usize, seed: u64) -> Result<LabelVector> {
    let embedding = ncuts_embedding(a, k)?;
    Ok(kmeans_with(&embedding.vectors, k, seed, &KMeansOptions::default())?.labels)
}
