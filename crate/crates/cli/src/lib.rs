//! Command-line driver: solve a slot's equilibrium, simulate one time zone,
//! run Monte Carlo ensembles and parameter sweeps, and write the results as
//! CSV or JSON.

pub mod commands;
pub mod config;
pub mod output;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Model(#[from] rtp_game::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            match e.into_kind() {
                csv::ErrorKind::Io(io) => CliError::Io(io),
                _ => unreachable!("checked to be an i/o error"),
            }
        } else {
            CliError::Csv(e)
        }
    }
}

impl CliError {
    /// 2 for anything wrong with the inputs, 1 for failures while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Model(e) => match e {
                rtp_game::Error::InvalidParameter { .. }
                | rtp_game::Error::InvalidPrior(_)
                | rtp_game::Error::Configuration(_) => 2,
                _ => 1,
            },
            CliError::Io(_) | CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

pub use commands::{ensemble, simulate, solve, sweep};
pub use config::{RunConfig, SweepAxis};
pub use output::{Cell, Format, Table};
