//! Configuration-driven front end for the vibration PINN experiments.

pub mod compare;
pub mod config;
pub mod plot;
pub mod presets;
pub mod run;

use pinn_core::optimizer::TrainStatus;

/// Process exit status for a finished run.
pub fn exit_code(status: TrainStatus) -> u8 {
    match status {
        TrainStatus::EpochsExhausted => 0,
        TrainStatus::Converged => 3,
        TrainStatus::Diverged => 4,
    }
}

/// Environment variable naming the directory runs are written under.
pub const OUTPUT_ROOT_VAR: &str = "PINN_OUTPUT_ROOT";
