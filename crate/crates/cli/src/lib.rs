//! Experiment runner and invariant suite built on the `semicocycle` crate.
//!
//! Exit-code contract shared by the binary: `0` all invariants pass, `1`
//! numerical or invariant failure, `2` configuration error.

pub mod config;
pub mod run;
pub mod table;
pub mod verify;

pub use config::{ExperimentConfig, ExperimentKind};
pub use run::{execute, run_experiment, InvariantResult, ResultBundle, RunOutcome};
pub use table::{Cell, Table};
pub use verify::{verify_suite, CheckLine, VerifyOptions, VerifyReport};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("bad config: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Numerical(#[from] semicocycle::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::BadConfig(_) => 2,
            HarnessError::Numerical(_) | HarnessError::Io(_) => 1,
        }
    }
}
