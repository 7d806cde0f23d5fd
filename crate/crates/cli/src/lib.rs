//! Library half of the `fpt` binary: config parsing, command drivers, CSV
//! serialization and the validation suite. Kept as a library so integration
//! tests can drive everything in-process.

pub mod commands;
pub mod config;
pub mod csvfmt;
pub mod validate;

/// Errors with fixed process exit codes:
/// 1 usage, 2 config, 3 numerical failure, 4 validation failure.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Numerical(String),
    Validation,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Validation => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
            CliError::Validation => write!(f, "validation failure"),
        }
    }
}

impl From<fpt_core::Error> for CliError {
    fn from(e: fpt_core::Error) -> Self {
        match e {
            fpt_core::Error::Numerical(m) => CliError::Numerical(m),
            fpt_core::Error::Usage(m) => CliError::Usage(m),
            other => CliError::Config(other.to_string()),
        }
    }
}

/// Seed resolution: the `FPT_SEED` environment variable takes precedence
/// over the config value; its absence changes nothing.
pub fn effective_seed(config_seed: u64) -> Result<u64, CliError> {
    match std::env::var("FPT_SEED") {
        Ok(s) => s
            .trim()
            .parse::<u64>()
            .map_err(|_| CliError::Config(format!("FPT_SEED must be a 64-bit integer, got `{s}`"))),
        Err(std::env::VarError::NotPresent) => Ok(config_seed),
        Err(e) => Err(CliError::Config(format!("FPT_SEED unreadable: {e}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_are_fixed() {
        assert_eq!(CliError::Usage(String::new()).exit_code(), 1);
        assert_eq!(CliError::Config(String::new()).exit_code(), 2);
        assert_eq!(CliError::Numerical(String::new()).exit_code(), 3);
        assert_eq!(CliError::Validation.exit_code(), 4);
    }

    #[test]
    fn core_errors_map_to_codes() {
        let e: CliError = fpt_core::Error::Domain("d".into()).into();
        assert_eq!(e.exit_code(), 2);
        let e: CliError = fpt_core::Error::Numerical("n".into()).into();
        assert_eq!(e.exit_code(), 3);
    }
}
