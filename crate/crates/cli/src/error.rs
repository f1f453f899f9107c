use std::path::PathBuf;

use metgeo::GeoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed or inconsistent input.
    #[error("{0}")]
    Input(String),

    /// Input is well formed but lies outside the domain of the operation.
    #[error("{0}")]
    Domain(String),

    /// A check ran to completion and found a violated invariant.
    #[error("{0}")]
    Verification(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Geo(#[from] GeoError),
}

impl CliError {
    pub fn input(msg: impl Into<String>) -> Self {
        CliError::Input(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 verification failure, 2 input error, 3 domain error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Domain(_) => 3,
            CliError::Geo(e) => match e {
                GeoError::InvalidInput(_) | GeoError::NotPositiveDefinite { .. } => 2,
                GeoError::OutOfDomain { .. } | GeoError::NotInExpImage { .. } => 3,
            },
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_stable() {
        assert_eq!(CliError::Verification("x".into()).exit_code(), 1);
        assert_eq!(CliError::input("x").exit_code(), 2);
        assert_eq!(CliError::Domain("x".into()).exit_code(), 3);
        assert_eq!(CliError::from(GeoError::InvalidInput("x".into())).exit_code(), 2);
        let outside = GeoError::NotInExpImage {
            traceless_norm_sq: 1.0,
            threshold: 0.5,
        };
        assert_eq!(CliError::from(outside).exit_code(), 3);
    }
}
