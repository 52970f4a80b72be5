//! Outlying constant mean curvature spheres in asymptotically flat metrics
//! with homogeneous degree -2 perturbations: quadrature, the reduced area
//! functional on sphere centers, a profile construction making that
//! functional attain an interior minimum, and a finite-dimensional
//! reduction solver that locates the resulting surfaces.

pub mod checks;
pub mod cli;
pub mod counterexample;
pub mod error;
pub mod functional;
pub mod harmonics;
pub mod metric;
pub mod quadrature;
pub mod report;
pub mod solve;
pub mod special;
pub mod surface;
pub mod tensor;

pub use error::{Error, Result};

/// CLI entry; returns the process exit code.
pub fn run() -> i32 {
    cli::run(std::env::args_os())
}

