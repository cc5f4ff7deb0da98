//! Graph convolutional operator, feature aggregation, affinity construction
//! and m-largest coefficient thresholding.

use std::cmp::Ordering;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// One-hop graph convolutional operator `S = (C + I) / 2`.
///
/// When `C` is symmetric, nonnegative, zero-diagonal and has unit row sums,
/// the degree matrix of `C + I` is `2I` and the symmetric normalization
/// `D^{-1/2} (C + I) D^{-1/2}` collapses to this form.
#[derive(Debug, Clone, PartialEq)]
pub struct Gco {
    values: DMatrix<f64>,
}

impl Gco {
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }
}

/// Symmetric, entrywise nonnegative affinity matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Affinity {
    values: DMatrix<f64>,
}

impl Affinity {
    /// Wraps a matrix after checking it is square, nonnegative and symmetric
    /// to within `1e-12` absolute.
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        require_square(&values, "affinity")?;
        let n = values.nrows();
        for j in 0..n {
            for i in 0..n {
                let v = values[(i, j)];
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "affinity entry ({i}, {j}) = {v} is not a finite nonnegative value"
                    )));
                }
                if (v - values[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidArgument(format!(
                        "affinity is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        Self::new(&self.values * factor)
    }

    /// Relabels vertices: vertex `perm[i]` of the input becomes vertex `i`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.n();
        Self {
            values: DMatrix::from_fn(n, n, |i, j| self.values[(perm[i], perm[j])]),
        }
    }

    /// Share of total affinity mass that connects samples with different
    /// labels.
    pub fn off_block_fraction(&self, labels: &[usize]) -> f64 {
        let n = self.n();
        let mut total = 0.0;
        let mut off = 0.0;
        for j in 0..n {
            for i in 0..n {
                let v = self.values[(i, j)];
                total += v;
                if labels[i] != labels[j] {
                    off += v;
                }
            }
        }
        if total == 0.0 {
            0.0
        } else {
            off / total
        }
    }
}

fn require_square(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "{what} must be square, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    Ok(())
}

pub fn gco_from_coefficients(c: &DMatrix<f64>) -> Result<Gco> {
    require_square(c, "coefficient matrix")?;
    let mut values = c.clone();
    for i in 0..values.nrows() {
        values[(i, i)] += 1.0;
    }
    values *= 0.5;
    Ok(Gco { values })
}

/// Aggregated features `F = S X`.
pub fn aggregate_features(s: &Gco, x: &DataMatrix) -> Result<DMatrix<f64>> {
    if s.values.ncols() != x.n() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but data has {} samples",
            s.values.nrows(),
            s.values.ncols(),
            x.n()
        )));
    }
    Ok(&s.values * x.values())
}

/// `A = (|C| + |C^T|) / 2`.
pub fn affinity_from_coefficients(c: &DMatrix<f64>) -> Result<Affinity> {
    require_square(c, "coefficient matrix")?;
    let n = c.nrows();
    // IEEE addition commutes, so A[i][j] and A[j][i] are bit-identical
    let values = DMatrix::from_fn(n, n, |i, j| (c[(i, j)].abs() + c[(j, i)].abs()) / 2.0);
    Ok(Affinity { values })
}

/// Keeps the `m` largest-magnitude entries in every column of `C` and zeroes
/// the rest. Ties go to the lower row index. Kept entries are copied
/// unchanged (sign included).
pub fn threshold_m_largest(c: &DMatrix<f64>, m: usize) -> Result<DMatrix<f64>> {
    if m == 0 {
        return Err(Error::InvalidArgument(
            "threshold m must be at least 1".into(),
        ));
    }
    let n = c.nrows();
    if m >= n {
        return Ok(c.clone());
    }
    let columns: Vec<Vec<f64>> = (0..c.ncols())
        .into_par_iter()
        .map(|j| {
            let col = c.column(j);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| {
                col[b]
                    .abs()
                    .partial_cmp(&col[a].abs())
                    .unwrap_or(Ordering::Equal)
                    .then(a.cmp(&b))
            });
            let mut kept = vec![0.0; n];
            for &i in &order[..m] {
                kept[i] = col[i];
            }
            kept
        })
        .collect();
    Ok(DMatrix::from_fn(n, c.ncols(), |i, j| columns[j][i]))
}
