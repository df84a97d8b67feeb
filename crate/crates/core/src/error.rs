use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the domain of the function it was passed to.
    #[error("{name} = {value} is out of domain: expected {expected}")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("withdrawn intensity {mu_e} exceeds the line loss budget {mu_e_max}")]
    WithdrawalExceedsLoss { mu_e: f64, mu_e_max: f64 },

    #[error(
        "blocking fraction {block_fraction} exceeds the simulated inconclusive fraction \
         {inconclusive} by more than 5 standard errors"
    )]
    InfeasibleBlocking {
        block_fraction: f64,
        inconclusive: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidSpec(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: malformed record: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        Error::Domain {
            name,
            value,
            expected,
        }
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Domain { .. } | Error::WithdrawalExceedsLoss { .. } | Error::InvalidSpec(_)
        )
    }
}
