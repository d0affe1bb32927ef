//! Shared fixtures for the kernel benchmarks.

use stoflow_core::{corpus, SdeSystem, Simplex, TimeVectorField};

/// The torus system driven by two divergence-free Fourier fields.
pub fn torus_system() -> SdeSystem {
    SdeSystem::new(
        TimeVectorField::zero(2),
        vec![
            corpus::field("torus.A(1,0)").unwrap(),
            corpus::field("torus.B(1,1)").unwrap(),
        ],
    )
    .unwrap()
}

pub fn torus_triangle() -> Simplex {
    Simplex::new(vec![vec![0.0, 0.0], vec![0.5, 0.0], vec![0.0, 0.5]]).unwrap()
}
