//! Fixtures shared by the benchmarks.

use eqsmooth_core::experiments::random_instance;
use eqsmooth_core::synthetic::sample_dataset;
use eqsmooth_core::{Budget, Dataset, GaussianSpec, SyntheticModel};

pub const EPSILON: f64 = 0.25;

/// Random proper-cap instance of the given size.
pub fn caps(n: usize, dim: usize, seed: u64) -> Dataset {
    random_instance(n, dim, EPSILON, seed).expect("valid instance parameters")
}

/// Records sampled from a linear model under standard Gaussian inputs.
pub fn linear_sample(n: usize, dim: usize, seed: u64) -> Dataset {
    let w = vec![1.0 / (dim as f64).sqrt(); dim];
    let model = SyntheticModel::linear(w, 0.0).expect("nonzero weights");
    let budget = Budget::new(EPSILON, dim).expect("valid budget");
    sample_dataset(&model, &GaussianSpec::standard(dim), n, &budget, seed)
        .expect("linear models never reject")
}
