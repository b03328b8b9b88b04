//! Shared fixtures for the construction benchmarks.

use relunet::{build_holder_net, Domain, HolderBuild, HolderFunction};
use std::sync::Arc;

/// Quadratic interpolation build used by the benchmarks: small enough to
/// rebuild in a timing loop, large enough to exercise the product banks.
pub fn quadratic_build(n: usize, m: usize) -> HolderBuild {
    let f = HolderFunction::new(
        Domain::new_box(vec![0.25, 0.25], vec![0.75, 0.75]).unwrap(),
        2.0,
        1.0,
        Arc::new(|x: &[f64]| x[0] * x[0] + x[0] * x[1]),
    )
    .unwrap();
    build_holder_net(&f, n, m, None).unwrap()
}
