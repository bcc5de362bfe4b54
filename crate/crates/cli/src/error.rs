use std::fmt;
use std::io;
use std::path::PathBuf;

use mbfusion::FusionError;

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Fusion(FusionError),
    /// A diagnostic found a violated invariant.
    Check(String),
    Io(PathBuf, io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Fusion(e) if e.is_config_error() => 2,
            CliError::Fusion(e) if e.is_cap_failure() => 4,
            CliError::Fusion(_) | CliError::Check(_) => 3,
            CliError::Io(..) => 1,
        }
    }

    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Fusion(e) if e.is_cap_failure() => Some(
                "use a smaller instance, a smaller --gamma, or raise cluster_cap/naive_cap (fallback = true lets oversized clusters fuse exhaustively)",
            ),
            _ => None,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config: {m}"),
            CliError::Fusion(e) => write!(f, "{e}"),
            CliError::Check(m) => write!(f, "{m}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

impl From<FusionError> for CliError {
    fn from(e: FusionError) -> Self {
        CliError::Fusion(e)
    }
}
