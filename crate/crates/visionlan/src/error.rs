use thiserror::Error;

/// Errors surfaced by every module in the crate.
#[derive(Debug, Error)]
pub enum VlanError {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("numeric contract violation: {0}")]
    Numeric(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("vocabulary error: {0}")]
    Vocab(String),

    #[error("index error: {0}")]
    Index(String),

    #[error("length error: {0}")]
    Length(String),

    #[error("layout error: {0}")]
    Layout(String),

    #[error("contract error: {0}")]
    Contract(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, VlanError>;

impl VlanError {
    /// Process exit code for the CLI: 1 for configuration problems,
    /// 2 for numeric-contract violations, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            VlanError::Numeric(_) | VlanError::Contract(_) => 2,
            _ => 1,
        }
    }
}
