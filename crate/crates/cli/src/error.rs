use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{module}: {source}")]
    Core {
        module: &'static str,
        #[source]
        source: csvqr_core::Error,
    },
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Core { .. } => EXIT_DATA,
        }
    }
}

/// Attach the pipeline module a core error came from. Data-layer failures
/// are attributed to `dataset` whichever command hit them.
pub fn in_module(module: &'static str) -> impl Fn(csvqr_core::Error) -> CliError {
    move |source| {
        use csvqr_core::Error as E;
        let module = match source.root() {
            E::Parse { .. }
            | E::Integrity(_)
            | E::Validation(_)
            | E::Coverage { .. }
            | E::Csv(_) => "dataset",
            E::ModelFormat(_) => "csvqr",
            _ => module,
        };
        CliError::Core { module, source }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
