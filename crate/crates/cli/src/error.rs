use sharpfield_core::Error;

/// A failed command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration, arguments or paths.
    #[error("{0}")]
    User(String),
    /// NaN or infinity during training or rendering.
    #[error("{0}")]
    Numeric(String),
    /// A broken internal invariant.
    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::User(_) => 1,
            CliError::Numeric(_) => 2,
            CliError::Internal(_) => 3,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_) | Error::Parse { .. } | Error::Io { .. } | Error::BlindAccess => {
                CliError::User(msg)
            }
            Error::NonFinite(_) => CliError::Numeric(msg),
            Error::ShapeMismatch { .. }
            | Error::Domain { .. }
            | Error::NonScalarRoot(_)
            | Error::IndexOutOfRange { .. } => CliError::Internal(msg),
        }
    }
}

pub fn io_err(path: &std::path::Path, e: std::io::Error) -> CliError {
    CliError::User(format!("{}: {e}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_error_class() {
        let cases = [
            (Error::Config("x".into()), 1),
            (Error::BlindAccess, 1),
            (Error::NonFinite("loss".into()), 2),
            (Error::NonScalarRoot(vec![2]), 3),
            (
                Error::IndexOutOfRange {
                    what: "row",
                    index: 3,
                    len: 2,
                },
                3,
            ),
        ];
        for (e, code) in cases {
            assert_eq!(CliError::from(e).exit_code(), code);
        }
    }
}
