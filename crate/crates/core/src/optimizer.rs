//! Adam and the epoch/batch training loop.

use std::time::{Duration, Instant};

use log::{debug, info};
use thiserror::Error;

use crate::losses::{rebalance_weights, training_log_header, training_log_row, CompositeLoss, LossError};
use crate::parallel::Parallelism;
use crate::sampling::batches;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("non-finite gradient entry at index {0}")]
    NonFiniteGradient(usize),
    #[error("gradient has {got} entries, optimizer expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid training configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Loss(#[from] LossError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub config: AdamConfig,
}

impl AdamState {
    pub fn new(dim: usize, config: AdamConfig) -> Self {
        Self {
            step: 0,
            m: vec![0.0; dim],
            v: vec![0.0; dim],
            config,
        }
    }
}

/// One bias-corrected Adam update of `params` in place. The state is left
/// untouched when the gradient is rejected.
pub fn adam_step(state: &mut AdamState, params: &mut [f64], grad: &[f64]) -> Result<(), TrainError> {
    if grad.len() != state.m.len() || params.len() != state.m.len() {
        return Err(TrainError::DimensionMismatch {
            expected: state.m.len(),
            got: grad.len().min(params.len()),
        });
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(TrainError::NonFiniteGradient(i));
    }
    let AdamConfig { lr, beta1, beta2, eps } = state.config;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - beta1.powi(t);
    let c2 = 1.0 - beta2.powi(t);
    for ((p, &g), (m, v)) in params
        .iter_mut()
        .zip(grad)
        .zip(state.m.iter_mut().zip(state.v.iter_mut()))
    {
        *m = beta1 * *m + (1.0 - beta1) * g;
        *v = beta2 * *v + (1.0 - beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= lr * m_hat / (v_hat.sqrt() + eps);
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum LambdaMode {
    Static,
    /// Gradient-balancing update every `period` epochs with moving-average
    /// factor `alpha`.
    Rebalance {
        alpha: f64,
        period: usize,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    /// Points per batch of the largest term; 0 means full batch.
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    pub lambda_mode: LambdaMode,
    pub stop_tolerance: Option<f64>,
    pub parallelism: Parallelism,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1000,
            batch_size: 0,
            adam: AdamConfig::default(),
            seed: 0,
            lambda_mode: LambdaMode::Static,
            stop_tolerance: None,
            parallelism: Parallelism::Sequential,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::BadConfig("epochs must be >= 1".into()));
        }
        if !(self.adam.lr >= 0.0 && self.adam.lr.is_finite()) {
            return Err(TrainError::BadConfig(
                "learning rate must be finite and non-negative".into(),
            ));
        }
        if let LambdaMode::Rebalance { alpha, period } = self.lambda_mode {
            if !(0.0..=1.0).contains(&alpha) || period == 0 {
                return Err(TrainError::BadConfig(
                    "rebalance needs alpha in [0,1] and period >= 1".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TrainStatus {
    /// Total loss dropped below the stop tolerance.
    Converged,
    EpochsExhausted,
    /// Loss or gradient became non-finite; the report holds the last good state.
    Diverged,
}

impl TrainStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TrainStatus::Converged => "converged",
            TrainStatus::EpochsExhausted => "epochs-exhausted",
            TrainStatus::Diverged => "diverged",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Weighted total, averaged over the epoch's batches.
    pub total: f64,
    pub terms: Vec<f64>,
    pub weights: Vec<f64>,
    pub physical: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct TrainReport {
    pub status: TrainStatus,
    pub epochs_run: usize,
    pub history: Vec<EpochRecord>,
    pub trainables: Vec<f64>,
    pub term_names: Vec<String>,
    pub physical_names: Vec<String>,
    pub wall_clock: Duration,
}

impl TrainReport {
    pub fn final_loss(&self) -> Option<f64> {
        self.history.last().map(|r| r.total)
    }

    /// Learned physical parameters, in registration order.
    pub fn physical(&self) -> Vec<(String, f64)> {
        let d = self.trainables.len() - self.physical_names.len();
        self.physical_names
            .iter()
            .cloned()
            .zip(self.trainables[d..].iter().copied())
            .collect()
    }

    pub fn training_log_csv(&self) -> String {
        let mut out = training_log_header(&self.term_names, &self.physical_names);
        out.push('\n');
        for r in &self.history {
            out.push_str(&training_log_row(r.epoch, r.total, &r.terms, &r.weights, &r.physical));
            out.push('\n');
        }
        out
    }
}

/// Minimizes `loss` over `trainables` with Adam. The last
/// `physical_names.len()` entries of `trainables` are physical scalars; the
/// rest are network parameters.
pub fn train(
    loss: &mut CompositeLoss,
    trainables: &[f64],
    physical_names: &[String],
    config: &TrainConfig,
) -> Result<TrainReport, TrainError> {
    config.validate()?;
    let dim = trainables.len();
    if dim != loss.n_params() {
        return Err(TrainError::DimensionMismatch {
            expected: loss.n_params(),
            got: dim,
        });
    }
    let n_network = dim - physical_names.len();
    let start = Instant::now();
    let mut params = trainables.to_vec();
    let mut adam = AdamState::new(dim, config.adam);
    let mut history = Vec::with_capacity(config.epochs);
    let mut status = TrainStatus::EpochsExhausted;

    let sizes: Vec<usize> = (0..loss.len()).map(|i| loss.term(i).set.len()).collect();
    let largest = sizes.iter().copied().max().unwrap_or(0);
    let n_batches = if config.batch_size == 0 {
        1
    } else {
        largest.div_ceil(config.batch_size).max(1)
    };

    let mut epochs_run = 0;
    'epochs: for epoch in 0..config.epochs {
        let selections: Option<Vec<Vec<Vec<usize>>>> = (n_batches > 1).then(|| {
            sizes
                .iter()
                .enumerate()
                .map(|(i, &n)| {
                    let term_seed = config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
                    batches(n, n.div_ceil(n_batches), term_seed, epoch as u64)
                })
                .collect()
        });
        let mut sum_total = 0.0;
        let mut sum_terms = vec![0.0; loss.len()];
        for step in 0..n_batches {
            let sel: Option<Vec<Vec<usize>>> = selections
                .as_ref()
                .map(|per_term| per_term.iter().map(|b| b[step % b.len()].clone()).collect());
            let ev = match loss.evaluate(&params, sel.as_deref(), config.parallelism) {
                Ok(ev) if ev.breakdown.total.is_finite() => ev,
                Ok(_) | Err(LossError::Ad(_)) => {
                    status = TrainStatus::Diverged;
                    break 'epochs;
                }
                Err(e) => return Err(e.into()),
            };
            if let LambdaMode::Rebalance { alpha, period } = config.lambda_mode {
                if step == 0 && epoch > 0 && epoch % period == 0 {
                    rebalance_weights(loss, &ev.term_grads, alpha, n_network);
                }
            }
            sum_total += ev.breakdown.total;
            for (acc, v) in sum_terms.iter_mut().zip(&ev.breakdown.terms) {
                *acc += v;
            }
            let mut next = params.clone();
            match adam_step(&mut adam, &mut next, &ev.grad) {
                Ok(()) if next.iter().all(|p| p.is_finite()) => params = next,
                Ok(()) | Err(TrainError::NonFiniteGradient(_)) => {
                    status = TrainStatus::Diverged;
                    break 'epochs;
                }
                Err(e) => return Err(e),
            }
        }
        let nb = n_batches as f64;
        let record = EpochRecord {
            epoch,
            total: sum_total / nb,
            terms: sum_terms.iter().map(|v| v / nb).collect(),
            weights: loss.weights(),
            physical: params[n_network..].to_vec(),
        };
        if epoch % 1000 == 0 {
            debug!(
                "epoch {epoch}: loss {:.6e} physical {:?}",
                record.total, record.physical
            );
        }
        let done = config.stop_tolerance.is_some_and(|tol| record.total < tol);
        history.push(record);
        epochs_run = epoch + 1;
        if done {
            status = TrainStatus::Converged;
            break;
        }
    }
    let wall_clock = start.elapsed();
    info!(
        "training finished: {} after {epochs_run} epochs in {:.1?}",
        status.as_str(),
        wall_clock
    );
    Ok(TrainReport {
        status,
        epochs_run,
        history,
        trainables: params,
        term_names: loss.names(),
        physical_names: physical_names.to_vec(),
        wall_clock,
    })
}
