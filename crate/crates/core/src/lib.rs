//! Physics-informed neural networks for structural vibration problems.
//!
//! The crate is layered bottom-up:
//!
//! * [`autodiff`]: scalar expression graphs, symbolic input derivatives and
//!   reverse-mode parameter gradients.
//! * [`network`]: dense, polynomial and Fourier network builders.
//! * [`sampling`]: collocation grids, boundary/initial subsets and batching.
//! * [`losses`]: weighted multi-term MSE objectives and weight rebalancing.
//! * [`optimizer`]: Adam and the training loop.
//! * [`problems`]: the experiment suite with analytic oracles.

pub mod autodiff;
pub mod losses;
pub mod network;
pub mod optimizer;
pub mod parallel;
pub mod problems;
pub mod sampling;

pub use autodiff::{EvalContext, Expr, Graph};
pub use losses::{CompositeLoss, LossTerm};
pub use network::{Activation, NetworkSpec, ParamStore};
pub use optimizer::{TrainConfig, TrainReport, TrainStatus};
pub use sampling::{CollocationSet, Role};
