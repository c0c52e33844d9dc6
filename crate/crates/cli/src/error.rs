use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DNC: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] parnes_core::Error),

    #[error("i/o error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("thread pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(
                parnes_core::Error::NumericalFailure(_)
                | parnes_core::Error::FlatCurve { .. }
                | parnes_core::Error::UndefinedMultiplier,
            ) => EXIT_NUMERICAL,
            _ => EXIT_USAGE,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => match e {
                parnes_core::Error::InvalidDimension(_)
                | parnes_core::Error::DimensionMismatch { .. } => "dimension",
                parnes_core::Error::Domain(_) => "domain",
                parnes_core::Error::NumericalFailure(_) => "numerical_failure",
                parnes_core::Error::FlatCurve { .. } => "flat_curve",
                parnes_core::Error::UndefinedMultiplier => "undefined_multiplier",
                parnes_core::Error::Load { .. } => "load",
                parnes_core::Error::Io { .. } => "io",
            },
            CliError::Io { .. } => "io",
            CliError::Csv(_) => "csv",
            CliError::Pool(_) => "thread_pool",
        }
    }

    /// Machine-readable form printed on stdout.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            error: &'a str,
            message: String,
            exit_code: i32,
        }
        serde_json::to_string(&Body {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("error body serializes")
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
