//! Deterministic fixtures shared by the benchmarks.

use hipdyn::{CMatrix, C64};

/// Dense non-normal test matrix with entries `sin`/`cos` of their indices.
pub fn dense(n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n);
    for i in 0..n {
        for j in 0..n {
            let k = (i * n + j) as f64;
            m[(i, j)] = C64::new((1.3 * k).sin(), 0.5 * (0.7 * k).cos());
        }
    }
    m
}
