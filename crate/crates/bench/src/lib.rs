//! Shared fixtures for the benchmarks.

use agcsc_core::{generate_union_of_subspaces, Affinity, DataMatrix, LabelVector, SyntheticSpec};
use nalgebra::DMatrix;

/// Three-subspace data set with `n_per` samples per subspace.
pub fn subspace_data(n_per: usize) -> (DataMatrix, LabelVector) {
    let spec = SyntheticSpec {
        k: 3,
        n_per,
        d: 30,
        r: 4,
        sigma: 0.01,
        seed: 1,
    };
    generate_union_of_subspaces(&spec).expect("valid synthetic spec")
}

/// Affinity with `k` equal dense blocks plus a weak uniform background.
pub fn block_affinity(n: usize, k: usize) -> Affinity {
    let values = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else if i * k / n == j * k / n {
            1.0
        } else {
            0.01
        }
    });
    Affinity::new(values).expect("symmetric nonnegative")
}
