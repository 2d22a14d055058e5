//! Synthetic measurement sets.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::sampling::{Axis, CollocationSet, Role};

use super::physics::{self, Values};
use super::ProblemKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RegressionKind {
    Linear,
    Quadratic,
    Fourier,
}

impl RegressionKind {
    pub fn problem(self) -> ProblemKind {
        match self {
            RegressionKind::Linear => ProblemKind::LinearRegression,
            RegressionKind::Quadratic => ProblemKind::QuadraticRegression,
            RegressionKind::Fourier => ProblemKind::FourierSmoothing,
        }
    }

    /// Sampling interval of the generator.
    pub fn interval(self) -> (f64, f64) {
        match self {
            RegressionKind::Linear | RegressionKind::Quadratic => (-1.0, 1.0),
            RegressionKind::Fourier => (0.0, 6.0),
        }
    }
}

/// Measurements `values` at `points`, with the noise level and seed that
/// produced them.
#[derive(Clone, Debug, PartialEq)]
pub struct DataSet {
    pub points: CollocationSet,
    pub values: Vec<f64>,
    pub sigma: f64,
    pub seed: u64,
}

/// Evaluates `clean` at every point and adds `N(0, sigma^2)` noise drawn
/// from a generator seeded with `seed`.
pub fn noisy_samples(points: CollocationSet, clean: impl Fn(&[f64]) -> f64, sigma: f64, seed: u64) -> DataSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, sigma.max(0.0)).expect("non-negative standard deviation");
    let values = points
        .iter()
        .map(|p| {
            let y = clean(p);
            if sigma > 0.0 {
                y + noise.sample(&mut rng)
            } else {
                y
            }
        })
        .collect();
    DataSet {
        points: points.with_role(Role::Data),
        values,
        sigma,
        seed,
    }
}

/// `n` evenly spaced samples of the regression generator on its interval.
///
/// # Panics
/// If `n < 2` or `sigma` is negative or not finite.
pub fn gen_regression_data(kind: RegressionKind, n: usize, sigma: f64, seed: u64) -> DataSet {
    assert!(n >= 2, "need at least two samples");
    assert!(sigma >= 0.0 && sigma.is_finite(), "noise level must be finite and >= 0");
    let (lo, hi) = kind.interval();
    let points = CollocationSet::new(1, Axis::new(lo, hi, n).nodes(), Role::Data);
    let problem = kind.problem();
    noisy_samples(points, |p| physics::oracle(problem, p, &Values::default()), sigma, seed)
}
