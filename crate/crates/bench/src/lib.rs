//! Fixtures shared by the benchmarks.

use std::sync::Arc;

use tvflow::datum::Datum;
use tvflow::{Boundary, Field, GridDomain, Manifold};

pub const TARGETS: &[&str] = &["euclidean:1", "circle", "sphere:3:1", "cylinder:1", "so3"];

/// Seeded noise around the base point on an `n × n` grid.
pub fn noisy_field(target: &str, n: usize) -> Field {
    let man: Manifold = target.parse().expect("known target");
    let dom = GridDomain::unit(&[n, n], Boundary::NeumannReflect).expect("valid grid");
    Datum::Noise { scale: 0.3, p0: None }
        .generate(Arc::new(dom), Arc::new(man), 1)
        .expect("noise datum")
}
