//! Inputs shared by the benchmarks.

use octoport_core::linalg::c;
use octoport_core::{Cutoff, DensityOperator};

pub fn vacuum() -> DensityOperator {
    DensityOperator::vacuum(Cutoff::new(2).expect("2 is a valid cutoff"))
}

pub fn coherent(re: f64) -> DensityOperator {
    DensityOperator::coherent(c(re, 0.0), Cutoff::for_amplitude(re)).expect("coherent state fits its rule cutoff")
}
