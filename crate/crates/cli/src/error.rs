use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] mortcast::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_owned(),
            source,
        }
    }

    /// 2 configuration, 3 parse, 4 numerical, 5 I/O.
    pub fn exit_code(&self) -> i32 {
        use mortcast::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Io { .. } => 5,
            CliError::Core(e) => match e {
                E::Domain(_) | E::Config(_) => 2,
                E::Parse { .. } => 3,
                E::Numerical(_) => 4,
                E::Io { .. } | E::Serialization(_) => 5,
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_distinct_per_failure_class() {
        let parse = mortcast::Error::Parse {
            line: 3,
            message: "bad".into(),
        };
        let cases = [
            (CliError::Config("x".into()), 2),
            (mortcast::Error::Domain("x".into()).into(), 2),
            (parse.into(), 3),
            (mortcast::Error::Numerical("x".into()).into(), 4),
            (CliError::io(Path::new("f"), std::io::ErrorKind::NotFound.into()), 5),
        ];
        for (err, code) in cases {
            assert_eq!(err.exit_code(), code, "{err}");
        }
    }
}
