use mrvox_core::backbone::BackboneError;
use mrvox_core::codec::CodecError;
use mrvox_core::grid::GridError;
use mrvox_core::nn::ShapeError;
use mrvox_core::sim::SimError;

/// Errors split by exit code: usage mistakes exit 1, bad data exits 2.
/// A consumer closing stdout mid-write is not a failure; piping into `head`
/// must leave the exit code 0.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Pipe,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Pipe => 0,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Data(m) => f.write_str(m),
            CliError::Pipe => f.write_str("output stream closed"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<ShapeError> for CliError {
    fn from(e: ShapeError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BackboneError> for CliError {
    fn from(e: BackboneError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> Self {
        match e {
            // Misconfiguration is a usage problem; broken inputs are data.
            SimError::InvalidConfig(m) => CliError::Usage(format!("invalid configuration: {m}")),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            CliError::Pipe
        } else {
            CliError::Data(e.to_string())
        }
    }
}
