//! Sample matrices, label vectors and their on-disk formats.
//!
//! Rows are samples and columns are features throughout the crate. Two
//! interchange formats are supported:
//!
//! * **csv**: `,`-separated, `.` decimal point, no header row.
//! * **raw binary**: two little-endian `u64` dimensions (rows, columns)
//!   followed by `rows * columns` little-endian `f64` values in row-major
//!   order.
//!
//! Synthetic union-of-subspaces data is available through
//! [`generate_union_of_subspaces`].

use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `n x d` sample matrix. Guaranteed nonempty with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct DataMatrix {
    values: DMatrix<f64>,
}

impl DataMatrix {
    pub fn new(values: DMatrix<f64>) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(Error::InvalidArgument(format!(
                "data matrix must be nonempty, got {}x{}",
                values.nrows(),
                values.ncols()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            // column-major storage
            let (row, col) = (pos % values.nrows(), pos / values.nrows());
            return Err(Error::InvalidArgument(format!(
                "data matrix entry ({row}, {col}) is not finite"
            )));
        }
        Ok(Self { values })
    }

    pub fn from_row_slice(n: usize, d: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * d {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot fill a {n}x{d} matrix",
                data.len()
            )));
        }
        Self::new(DMatrix::from_row_slice(n, d, data))
    }

    /// Number of samples.
    pub fn n(&self) -> usize {
        self.values.nrows()
    }

    /// Number of features.
    pub fn d(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.values
    }
}

/// Cluster assignment for `n` samples with ids in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelVector {
    labels: Vec<usize>,
    k: usize,
}

impl LabelVector {
    pub fn new(labels: Vec<usize>, k: usize) -> Result<Self> {
        if let Some(&bad) = labels.iter().find(|&&l| l >= k) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} outside 0..{k}"
            )));
        }
        if k > labels.len() {
            return Err(Error::InvalidArgument(format!(
                "{k} clusters cannot be formed from {} samples",
                labels.len()
            )));
        }
        Ok(Self { labels, k })
    }

    /// Builds a label vector with `k = max(label) + 1`.
    pub fn from_labels(labels: Vec<usize>) -> Result<Self> {
        let k = labels.iter().max().map_or(0, |m| m + 1);
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatrixFormat {
    Csv,
    RawBinary,
}

impl FromStr for MatrixFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(MatrixFormat::Csv),
            "raw" | "bin" | "raw-binary" => Ok(MatrixFormat::RawBinary),
            other => Err(Error::InvalidArgument(format!(
                "unknown matrix format {other:?} (expected csv or raw-binary)"
            ))),
        }
    }
}

impl fmt::Display for MatrixFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatrixFormat::Csv => f.write_str("csv"),
            MatrixFormat::RawBinary => f.write_str("raw-binary"),
        }
    }
}

/// Loads a sample matrix. Row and column numbers in errors are 1-based.
pub fn load_dense_matrix(path: impl AsRef<Path>, format: MatrixFormat) -> Result<DataMatrix> {
    let path = path.as_ref();
    let values = match format {
        MatrixFormat::Csv => read_csv_matrix(path)?,
        MatrixFormat::RawBinary => read_raw_binary(path)?,
    };
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite {
            path: path.to_path_buf(),
            row: pos % values.nrows() + 1,
            column: pos / values.nrows() + 1,
        });
    }
    DataMatrix::new(values)
}

/// Writes any dense matrix in the requested format.
pub fn save_dense_matrix(
    matrix: &DMatrix<f64>,
    path: impl AsRef<Path>,
    format: MatrixFormat,
) -> Result<()> {
    match format {
        MatrixFormat::Csv => write_csv_matrix(matrix, path.as_ref()),
        MatrixFormat::RawBinary => write_raw_binary(matrix, path.as_ref()),
    }
}

fn read_csv_matrix(path: &Path) -> Result<DMatrix<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;

    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let expected = *cols.get_or_insert(record.len());
        if record.len() != expected {
            return Err(Error::RaggedRow {
                path: path.to_path_buf(),
                row: row + 1,
                expected,
                found: record.len(),
            });
        }
        for (column, cell) in record.iter().enumerate() {
            let value = cell.parse::<f64>().map_err(|_| Error::NonNumeric {
                path: path.to_path_buf(),
                row: row + 1,
                column: column + 1,
                text: cell.to_string(),
            })?;
            data.push(value);
        }
        rows += 1;
    }
    match cols {
        Some(cols) if rows > 0 && cols > 0 => Ok(DMatrix::from_row_slice(rows, cols, &data)),
        _ => Err(Error::EmptyFile {
            path: path.to_path_buf(),
        }),
    }
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("{other:?}"),
        },
    }
}

fn write_csv_matrix(matrix: &DMatrix<f64>, path: &Path) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for row in matrix.row_iter() {
        let line = row
            .iter()
            .map(|v| format!("{v:e}"))
            .collect::<Vec<_>>()
            .join(",");
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

const HEADER_BYTES: usize = 16;

pub fn read_raw_binary(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    if bytes.len() < HEADER_BYTES {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: format!("{} bytes is shorter than the 16-byte header", bytes.len()),
        });
    }
    let dim = |i: usize| {
        let mut buf = [0u8; 8];
        buf.copy_from_slice(&bytes[i * 8..i * 8 + 8]);
        u64::from_le_bytes(buf)
    };
    let (rows, cols) = (dim(0), dim(1));
    let expected = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| usize::try_from(b).ok());
    let payload = &bytes[HEADER_BYTES..];
    if expected != Some(payload.len()) {
        return Err(Error::Malformed {
            path: path.to_path_buf(),
            reason: format!(
                "header declares {rows}x{cols} but payload holds {} bytes",
                payload.len()
            ),
        });
    }
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    let values: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(DMatrix::from_row_slice(
        rows as usize,
        cols as usize,
        &values,
    ))
}

pub fn write_raw_binary(matrix: &DMatrix<f64>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(HEADER_BYTES + 8 * matrix.len());
    bytes.extend_from_slice(&(matrix.nrows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(matrix.ncols() as u64).to_le_bytes());
    for row in matrix.row_iter() {
        for v in row.iter() {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Reads one nonnegative integer label per line; blank lines are ignored.
pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelVector> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut labels = Vec::new();
    for (row, line) in text.lines().enumerate() {
        let cell = line.trim();
        if cell.is_empty() {
            continue;
        }
        let label = cell.parse::<usize>().map_err(|_| Error::NonNumeric {
            path: path.to_path_buf(),
            row: row + 1,
            column: 1,
            text: cell.to_string(),
        })?;
        labels.push(label);
    }
    if labels.is_empty() {
        return Err(Error::EmptyFile {
            path: path.to_path_buf(),
        });
    }
    LabelVector::from_labels(labels)
}

/// Maps 8-bit pixel intensities into `[0, 1]`.
pub fn normalize_pixel_range(x: &DataMatrix) -> DataMatrix {
    DataMatrix {
        values: x.values.map(|v| v / 255.0),
    }
}

/// Parameters of a synthetic union-of-subspaces data set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// Number of subspaces (clusters).
    pub k: usize,
    /// Samples drawn from each subspace.
    pub n_per: usize,
    /// Ambient dimension.
    pub d: usize,
    /// Subspace dimension.
    pub r: usize,
    /// Standard deviation of additive Gaussian noise.
    pub sigma: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn n(&self) -> usize {
        self.k * self.n_per
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("subspace count must be >= 1".into()));
        }
        if self.n_per == 0 {
            return Err(Error::InvalidArgument(format!(
                "{} samples cannot cover {} subspaces",
                self.n(),
                self.k
            )));
        }
        if self.r == 0 || self.r >= self.d {
            return Err(Error::InvalidArgument(format!(
                "subspace dimension must satisfy 1 <= r < d, got r={} d={}",
                self.r, self.d
            )));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "noise scale must be finite and >= 0, got {}",
                self.sigma
            )));
        }
        Ok(())
    }
}

/// Draws `n_per` samples from each of `k` random `r`-dimensional subspaces.
///
/// Sample `j` of subspace `i` lands in row `i * n_per + j` and equals
/// `B_i w + sigma * e` with `B_i` a `d x r` orthonormal basis (QR of a
/// Gaussian matrix), `w ~ N(0, I_r)` and `e ~ N(0, I_d)`. The noise is drawn
/// even when `sigma = 0`, so changing `sigma` alone never changes the bases
/// or the weights.
pub fn generate_union_of_subspaces(spec: &SyntheticSpec) -> Result<(DataMatrix, LabelVector)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gaussian = || -> f64 { StandardNormal.sample(&mut rng) };

    let n = spec.n();
    let mut x = DMatrix::zeros(n, spec.d);
    let mut labels = Vec::with_capacity(n);
    for cluster in 0..spec.k {
        let raw = DMatrix::from_fn(spec.d, spec.r, |_, _| gaussian());
        let basis = raw.qr().q();
        for j in 0..spec.n_per {
            let w = nalgebra::DVector::from_fn(spec.r, |_, _| gaussian());
            let noise = nalgebra::DVector::from_fn(spec.d, |_, _| gaussian());
            let sample = &basis * w + noise * spec.sigma;
            x.row_mut(cluster * spec.n_per + j)
                .copy_from(&sample.transpose());
            labels.push(cluster);
        }
    }
    Ok((DataMatrix::new(x)?, LabelVector::new(labels, spec.k)?))
}

/// Orthonormal basis of each generating subspace, in the same order and from
/// the same random stream as [`generate_union_of_subspaces`].
pub fn synthetic_bases(spec: &SyntheticSpec) -> Result<Vec<DMatrix<f64>>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut gaussian = || -> f64 { StandardNormal.sample(&mut rng) };
    let mut bases = Vec::with_capacity(spec.k);
    for _ in 0..spec.k {
        let raw = DMatrix::from_fn(spec.d, spec.r, |_, _| gaussian());
        bases.push(raw.qr().q());
        for _ in 0..spec.n_per * (spec.r + spec.d) {
            gaussian();
        }
    }
    Ok(bases)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn spec(k: usize, n_per: usize, d: usize, r: usize, sigma: f64) -> SyntheticSpec {
        SyntheticSpec {
            k,
            n_per,
            d,
            r,
            sigma,
            seed: 7,
        }
    }

    #[test]
    fn single_cell_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.csv");
        fs::write(&path, "0.5\n").unwrap();
        let x = load_dense_matrix(&path, MatrixFormat::Csv).unwrap();
        assert_eq!((x.n(), x.d()), (1, 1));
        assert_eq!(x.values()[(0, 0)], 0.5);
    }

    #[test]
    fn raw_binary_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.bin");
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = DMatrix::from_fn(4, 3, |_, _| StandardNormal.sample(&mut rng));
        write_raw_binary(&m, &path).unwrap();
        let back = load_dense_matrix(&path, MatrixFormat::RawBinary).unwrap();
        assert_eq!(back.values(), &m);
        assert_eq!(fs::metadata(&path).unwrap().len(), 16 + 12 * 8);
    }

    #[test]
    fn orl_shaped_csv_keeps_every_cell() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("orl.csv");
        let row = vec!["17"; 1024].join(",");
        let text = (0..400)
            .map(|_| row.as_str())
            .collect::<Vec<_>>()
            .join("\n");
        fs::write(&path, text).unwrap();
        let x = load_dense_matrix(&path, MatrixFormat::Csv).unwrap();
        assert_eq!((x.n(), x.d()), (400, 1024));
        assert_eq!(x.values().len(), 400 * 1024);
    }

    #[test]
    fn csv_errors_carry_location() {
        let dir = tempfile::tempdir().unwrap();
        let ragged = dir.path().join("ragged.csv");
        fs::write(&ragged, "1,2,3\n4,5\n").unwrap();
        match load_dense_matrix(&ragged, MatrixFormat::Csv) {
            Err(Error::RaggedRow {
                row: 2,
                expected: 3,
                found: 2,
                ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }

        let text = dir.path().join("text.csv");
        fs::write(&text, "1,2\n3,abc\n").unwrap();
        match load_dense_matrix(&text, MatrixFormat::Csv) {
            Err(Error::NonNumeric {
                row: 2, column: 2, ..
            }) => {}
            other => panic!("unexpected {other:?}"),
        }

        let empty = dir.path().join("empty.csv");
        fs::write(&empty, "").unwrap();
        assert!(matches!(
            load_dense_matrix(&empty, MatrixFormat::Csv),
            Err(Error::EmptyFile { .. })
        ));

        let missing = dir.path().join("nope.csv");
        assert!(matches!(
            load_dense_matrix(&missing, MatrixFormat::Csv),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn raw_binary_rejects_truncated_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("short.bin");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&2u64.to_le_bytes());
        bytes.extend_from_slice(&1.0f64.to_le_bytes());
        fs::write(&path, bytes).unwrap();
        assert!(matches!(
            load_dense_matrix(&path, MatrixFormat::RawBinary),
            Err(Error::Malformed { .. })
        ));
    }

    #[test]
    fn non_finite_cells_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nan.csv");
        fs::write(&path, "1,2\n3,NaN\n").unwrap();
        assert!(matches!(
            load_dense_matrix(&path, MatrixFormat::Csv),
            Err(Error::NonFinite {
                row: 2,
                column: 2,
                ..
            })
        ));
    }

    #[test]
    fn labels_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.txt");
        fs::write(&path, "0\n1\n\n1\n2\n").unwrap();
        let labels = load_labels(&path).unwrap();
        assert_eq!(labels.labels(), &[0, 1, 1, 2]);
        assert_eq!(labels.k(), 3);
    }

    #[test]
    fn label_vector_invariants() {
        assert!(LabelVector::new(vec![0, 1, 2], 2).is_err());
        assert!(LabelVector::new(vec![0, 0], 3).is_err());
        assert!(LabelVector::new(vec![0, 1, 1], 2).is_ok());
    }

    #[test]
    fn pixel_normalization() {
        let zeros = DataMatrix::new(DMatrix::zeros(3, 2)).unwrap();
        assert_eq!(normalize_pixel_range(&zeros), zeros);

        let x = DataMatrix::from_row_slice(1, 3, &[255.0, 0.0, 51.0]).unwrap();
        let y = normalize_pixel_range(&x);
        assert_eq!(y.values()[(0, 0)], 1.0);
        assert_eq!(y.values()[(0, 2)], 0.2);

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pixels = DMatrix::from_fn(20, 30, |_, _| {
            rand::Rng::random_range(&mut rng, 0..=255u8) as f64
        });
        let y = normalize_pixel_range(&DataMatrix::new(pixels).unwrap());
        assert!(y.values().max() <= 1.0);
        assert!(y.values().min() >= 0.0);
    }

    #[test]
    fn synthetic_rank_one() {
        let (x, labels) = generate_union_of_subspaces(&spec(1, 12, 5, 1, 0.0)).unwrap();
        assert_eq!(labels.labels(), &[0; 12]);
        let sv = x.values().clone().singular_values();
        assert!(sv[0] > 1e-6);
        assert!(sv.iter().skip(1).all(|s| *s < 1e-12 * sv[0]));
    }

    #[test]
    fn synthetic_samples_lie_in_their_subspace() {
        let s = spec(3, 10, 8, 2, 0.0);
        let (x, labels) = generate_union_of_subspaces(&s).unwrap();
        let bases = synthetic_bases(&s).unwrap();
        for (i, row) in x.values().row_iter().enumerate() {
            let v = row.transpose();
            let b = &bases[labels.labels()[i]];
            let residual = &v - b * (b.transpose() * &v);
            assert!(residual.amax() < 1e-10, "sample {i}: {}", residual.amax());
        }
    }

    #[test]
    fn synthetic_is_deterministic() {
        let s = spec(3, 5, 6, 2, 0.1);
        let (a, la) = generate_union_of_subspaces(&s).unwrap();
        let (b, lb) = generate_union_of_subspaces(&s).unwrap();
        assert_eq!(a, b);
        assert_eq!(la, lb);
        let other = SyntheticSpec { seed: 8, ..s };
        assert_ne!(generate_union_of_subspaces(&other).unwrap().0, a);
    }

    #[test]
    fn synthetic_rejects_bad_specs() {
        assert!(generate_union_of_subspaces(&spec(2, 3, 4, 4, 0.0)).is_err());
        assert!(generate_union_of_subspaces(&spec(2, 0, 4, 2, 0.0)).is_err());
        assert!(generate_union_of_subspaces(&spec(2, 3, 4, 2, -1.0)).is_err());
    }

    proptest! {
        #[test]
        fn normalization_is_linear(
            a in -1e3f64..1e3,
            vals in proptest::collection::vec(-1e3f64..1e3, 6),
        ) {
            let x = DataMatrix::from_row_slice(2, 3, &vals).unwrap();
            let scaled = DataMatrix::new(x.values() * a).unwrap();
            let lhs = normalize_pixel_range(&scaled);
            let rhs = normalize_pixel_range(&x).values() * a;
            for (l, r) in lhs.values().iter().zip(rhs.iter()) {
                prop_assert!((l - r).abs() <= 4.0 * f64::EPSILON * r.abs().max(1e-300));
            }
        }

        #[test]
        fn noise_free_classes_have_rank_at_most_r(seed in 0u64..200, r in 1usize..4) {
            let s = SyntheticSpec { k: 2, n_per: 8, d: 6, r, sigma: 0.0, seed };
            let (x, labels) = generate_union_of_subspaces(&s).unwrap();
            for class in 0..2 {
                let rows: Vec<usize> =
                    (0..x.n()).filter(|&i| labels.labels()[i] == class).collect();
                let block = x.values().select_rows(&rows);
                let sv = block.singular_values();
                let top = sv.max();
                let rank = sv.iter().filter(|s| **s > 1e-10 * top).count();
                prop_assert!(rank <= r);
            }
        }
    }
}
