use std::path::PathBuf;

use thiserror::Error;

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] counterfact::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: toml::de::Error,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A prerequisite output of an earlier pipeline step is absent.
    #[error("{0}")]
    Missing(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 configuration, 3 data, 4 numerical failure.
    pub fn exit_code(&self) -> u8 {
        use counterfact::Error as E;
        match self {
            CliError::Config(_) | CliError::Toml { .. } => 2,
            CliError::Io { .. } | CliError::Missing(_) => 3,
            CliError::Core(e) => match e {
                E::InvalidConfig(_) => 2,
                E::Io { .. } | E::Malformed { .. } | E::NoObservations { .. } | E::InvalidData(_) | E::Json(_) => 3,
                E::Infeasible(_) | E::Estimation(_) | E::Numerical(_) => 4,
            },
        }
    }
}
