use thiserror::Error;

/// Problems with a scenario document or a parameter set. Every variant
/// carries the dotted key path of the offending entry where one exists.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("malformed scenario document: {0}")]
    Malformed(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("`{key}`: {reason}")]
    InvalidValue { key: String, reason: String },
    #[error("`{key}` violates an invariant: {reason}")]
    Invariant { key: String, reason: String },
}

impl ConfigError {
    pub(crate) fn invariant(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invariant {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub(crate) fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::InvalidValue {
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    /// Key path the error refers to, if any.
    pub fn key(&self) -> Option<&str> {
        match self {
            ConfigError::Malformed(_) => None,
            ConfigError::UnknownKey(k) => Some(k),
            ConfigError::InvalidValue { key, .. } | ConfigError::Invariant { key, .. } => Some(key),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("network has no alive nodes")]
    EmptyNetwork,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
