use std::path::Path;

/// Failure of a lab command, mapped onto the process exit code.
#[derive(Debug, thiserror::Error)]
pub enum LabError {
    /// Unparseable or inconsistent configuration, or a missing input.
    #[error("config error: {0}")]
    Config(String),
    #[error("run failed: {0}")]
    Run(String),
    /// An output broke a property it must satisfy.
    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl LabError {
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) => 2,
            LabError::Run(_) => 3,
            LabError::Invariant(_) => 4,
        }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        LabError::Run(format!("{}: {err}", path.display()))
    }
}

impl From<kgstitch_core::Error> for LabError {
    fn from(e: kgstitch_core::Error) -> Self {
        use kgstitch_core::Error as E;
        match e {
            E::InvalidParameter(_)
            | E::MalformedFacts(_)
            | E::MalformedGraph(_)
            | E::UnknownRelation(_)
            | E::UnknownObject(_) => LabError::Config(e.to_string()),
            _ => LabError::Run(e.to_string()),
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
