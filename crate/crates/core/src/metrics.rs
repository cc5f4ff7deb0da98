//! Clustering accuracy under the optimal label assignment, and normalized
//! mutual information.

use crate::error::{Error, Result};

/// Joint counts of predicted (rows) and true (columns) cluster ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContingencyTable {
    counts: Vec<Vec<u64>>,
    n: usize,
}

impl ContingencyTable {
    pub fn new(pred: &[usize], truth: &[usize]) -> Result<Self> {
        if pred.len() != truth.len() {
            return Err(Error::DimensionMismatch(format!(
                "label vectors differ in length ({} vs {})",
                pred.len(),
                truth.len()
            )));
        }
        if pred.is_empty() {
            return Err(Error::InvalidArgument("label vectors are empty".into()));
        }
        let rows = pred.iter().max().unwrap() + 1;
        let cols = truth.iter().max().unwrap() + 1;
        let mut counts = vec![vec![0u64; cols]; rows];
        for (&p, &t) in pred.iter().zip(truth) {
            counts[p][t] += 1;
        }
        Ok(Self {
            counts,
            n: pred.len(),
        })
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn pred_clusters(&self) -> usize {
        self.counts.len()
    }

    pub fn true_clusters(&self) -> usize {
        self.counts[0].len()
    }

    fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    fn col_sums(&self) -> Vec<u64> {
        (0..self.true_clusters())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// True when both labelings induce the same partition of the samples.
    pub fn same_partition(&self) -> bool {
        let single = |it: &mut dyn Iterator<Item = u64>| it.filter(|&c| c > 0).count() <= 1;
        self.counts.iter().all(|r| single(&mut r.iter().copied()))
            && (0..self.true_clusters()).all(|j| single(&mut self.counts.iter().map(|r| r[j])))
    }
}

/// Assignment of predicted cluster ids to true ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    /// `mapping[p]` is the true id matched to predicted id `p`, or `None`
    /// when there are more predicted than true clusters and `p` is left out.
    pub mapping: Vec<Option<usize>>,
    /// Number of samples whose mapped prediction equals the truth.
    pub matched: u64,
}

/// Maximum-weight assignment of `rows` to distinct `cols` (rows may stay
/// unassigned when they outnumber the columns). Hungarian algorithm on a
/// zero-padded square cost matrix.
fn max_assignment(
    weights: &[Vec<u64>],
    rows: &[usize],
    cols: &[usize],
) -> (u64, Vec<Option<usize>>) {
    let size = rows.len().max(cols.len());
    if size == 0 {
        return (0, Vec::new());
    }
    let top = weights
        .iter()
        .flat_map(|r| r.iter())
        .copied()
        .max()
        .unwrap_or(0) as i64;
    let cost = |i: usize, j: usize| -> i64 {
        let w = if i < rows.len() && j < cols.len() {
            weights[rows[i]][cols[j]] as i64
        } else {
            0
        };
        top - w
    };

    // potentials and matching are 1-based; index 0 is the virtual root
    let mut u = vec![0i64; size + 1];
    let mut v = vec![0i64; size + 1];
    let mut matched_row = vec![0usize; size + 1];
    let mut way = vec![0usize; size + 1];
    for i in 1..=size {
        matched_row[0] = i;
        let mut j0 = 0;
        let mut min_v = vec![i64::MAX; size + 1];
        let mut used = vec![false; size + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=size {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < min_v[j] {
                        min_v[j] = cur;
                        way[j] = j0;
                    }
                    if min_v[j] < delta {
                        delta = min_v[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=size {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_v[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![None; rows.len()];
    let mut total = 0;
    for j in 1..=size {
        let i = matched_row[j] - 1;
        if i < rows.len() && j - 1 < cols.len() {
            assignment[i] = Some(cols[j - 1]);
            total += weights[rows[i]][cols[j - 1]];
        }
    }
    (total, assignment)
}

/// Optimal assignment of predicted ids to true ids maximizing the number of
/// matched samples. Among optimal assignments the lexicographically smallest
/// `mapping` is returned, comparing `None` as larger than every id.
pub fn optimal_label_map(pred: &[usize], truth: &[usize]) -> Result<LabelMap> {
    let table = ContingencyTable::new(pred, truth)?;
    let counts = table.counts();
    let kp = table.pred_clusters();
    let kt = table.true_clusters();
    let all_cols: Vec<usize> = (0..kt).collect();
    let all_rows: Vec<usize> = (0..kp).collect();
    let (best, _) = max_assignment(counts, &all_rows, &all_cols);

    // Fix rows in order, each to the smallest choice that keeps the optimum
    // reachable.
    let mut mapping = Vec::with_capacity(kp);
    let mut free_cols = all_cols;
    let mut fixed = 0u64;
    for p in 0..kp {
        let rest: Vec<usize> = (p + 1..kp).collect();
        let unassigned_allowed = kp - p > free_cols.len();
        let mut choice = None;
        for (idx, &t) in free_cols.iter().enumerate() {
            let mut remaining = free_cols.clone();
            remaining.remove(idx);
            let (tail, _) = max_assignment(counts, &rest, &remaining);
            if fixed + counts[p][t] + tail == best {
                choice = Some((idx, t));
                break;
            }
        }
        match choice {
            Some((idx, t)) => {
                fixed += counts[p][t];
                free_cols.remove(idx);
                mapping.push(Some(t));
            }
            None => {
                debug_assert!(unassigned_allowed);
                mapping.push(None);
            }
        }
    }
    Ok(LabelMap {
        mapping,
        matched: best,
    })
}

/// Fraction of samples whose predicted cluster, after optimal relabeling,
/// equals the true cluster.
pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let rows: Vec<usize> = (0..table.pred_clusters()).collect();
    let cols: Vec<usize> = (0..table.true_clusters()).collect();
    let (matched, _) = max_assignment(table.counts(), &rows, &cols);
    Ok(matched as f64 / table.n() as f64)
}

fn entropy(sums: &[u64], n: f64) -> f64 {
    sums.iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .sum()
}

/// `I(pred, truth) / sqrt(H(pred) H(truth))`, natural logarithms. When
/// either entropy vanishes the result is 1 for identical partitions and 0
/// otherwise.
pub fn nmi(pred: &[usize], truth: &[usize]) -> Result<f64> {
    let table = ContingencyTable::new(pred, truth)?;
    let n = table.n() as f64;
    let rows = table.row_sums();
    let cols = table.col_sums();
    let h_pred = entropy(&rows, n);
    let h_true = entropy(&cols, n);
    if h_pred == 0.0 || h_true == 0.0 {
        return Ok(if table.same_partition() { 1.0 } else { 0.0 });
    }
    let mut mi = 0.0;
    for (i, row) in table.counts().iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                mi += c / n * (n * c / (rows[i] as f64 * cols[j] as f64)).ln();
            }
        }
    }
    Ok((mi / (h_pred * h_true).sqrt()).clamp(0.0, 1.0))
}
