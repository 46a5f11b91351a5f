//! Synthetic data under the uncoupled model.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use uir_core::isotonic::{DesignPoints, IsotonicFn};
use uir_core::noise::NoiseModel;

use crate::config::RegressionSpec;
use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: DesignPoints,
    /// Responses in a random order, unrelated to `x`.
    pub y: Vec<f64>,
    /// The same responses in design order; only the coupled baseline sees it.
    pub coupled_y: Vec<f64>,
    pub truth: IsotonicFn,
}

/// `y_i = f(i/n) + ξ_i`, then shuffled. Noise and permutation both come
/// from one ChaCha8 stream seeded with `seed`.
pub fn generate_dataset(
    f: &RegressionSpec,
    v: f64,
    n: usize,
    noise: &NoiseModel,
    seed: u64,
) -> CliResult<Dataset> {
    if n < 1 {
        return Err(CliError::Config("dataset needs at least one point".into()));
    }
    let x = DesignPoints::equispaced(n)?;
    let truth = f.at(&x, v)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coupled_y: Vec<f64> = truth.values().iter().map(|t| t + noise.sample(&mut rng)).collect();
    let mut y = coupled_y.clone();
    y.shuffle(&mut rng);
    Ok(Dataset {
        x,
        y,
        coupled_y,
        truth,
    })
}
