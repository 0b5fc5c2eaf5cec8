//! Synthetic windows with a known Gaussian noise level, for calibration checks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::Matrix;
use crate::profiles::{HorizonExo, Sample, WindowedDataset};

/// Toy data: features are i.i.d. standard normal; at step `k` the load target
/// is `2 + 0.8·x₀ + 0.3·k·x₁ + σ(x)·z` with `σ(x) = 0.3·(1 + 0.5·|x₂|)`, and
/// PV is `1 + 0.4·x₁ + 0.2·z'` (all steps daylight). `x` is the last row of
/// the window.
pub fn toy_gaussian_dataset(n_samples: usize, window: usize, feature_dim: usize, horizon: usize, seed: u64) -> WindowedDataset<f64> {
    assert!(feature_dim >= 3, "toy data needs at least 3 features");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || -> f64 { StandardNormal.sample(&mut rng) };
    let samples = (0..n_samples)
        .map(|origin| {
            let input = Matrix::from_vec(window, feature_dim, (0..window * feature_dim).map(|_| normal()).collect());
            let x = input.row(window - 1).to_vec();
            let sigma = toy_load_sigma(&x);
            let mut target = Matrix::zeros(horizon, 2);
            for k in 0..horizon {
                target[(k, 0)] = toy_load_mean(&x, k) + sigma * normal();
                target[(k, 1)] = 1.0 + 0.4 * x[1] + 0.2 * normal();
            }
            let exo = HorizonExo { daylight_flag: vec![1.0; horizon], norm_daylight: vec![1.0; horizon], hour: (0..horizon as u32).collect() };
            Sample { input, target, exo, origin }
        })
        .collect();
    WindowedDataset { samples, window, horizon }
}

pub fn toy_load_mean(last_row: &[f64], step: usize) -> f64 {
    2.0 + 0.8 * last_row[0] + 0.3 * step as f64 * last_row[1]
}

pub fn toy_load_sigma(last_row: &[f64]) -> f64 {
    0.3 * (1.0 + 0.5 * last_row[2].abs())
}
