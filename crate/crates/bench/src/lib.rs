//! Fixtures shared by the criterion benches.

use semicocycle::{AlgebraElement, NormTag, Scalar};

/// A dense, deterministic `m × m` matrix with entries in `[-1, 1]`.
pub fn fixture_matrix(m: usize, tag: NormTag) -> AlgebraElement {
    AlgebraElement::from_fn(m, tag, |i, j| {
        let k = (i * m + j) as f64;
        Scalar::new((1.7 * k + 0.3).sin(), (0.9 * k + 1.1).cos() * 0.5)
    })
}
