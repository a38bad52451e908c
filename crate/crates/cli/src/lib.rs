//! Command-line pipeline over the `protodep` library: configuration,
//! file-passing stages, and exit-status mapping.

pub mod config;
pub mod pipeline;

use protodep::ErrorKind;

pub use config::{ConfigError, PipelineConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

/// Exit status for a failed command. The first classified error in the
/// chain decides; anything unclassified counts as a data error.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return EXIT_CONFIG;
        }
        if let Some(e) = cause.downcast_ref::<protodep::Error>() {
            return match e.kind() {
                ErrorKind::Config => EXIT_CONFIG,
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numeric => EXIT_NUMERIC,
            };
        }
    }
    EXIT_DATA
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn codes_follow_error_kind() {
        let numeric: anyhow::Result<()> = Err(protodep::Error::Numeric("nan".into())).context("stage train");
        assert_eq!(exit_code(&numeric.unwrap_err()), EXIT_NUMERIC);
        let cfg: anyhow::Result<()> = Err(ConfigError("x".into())).context("stage eval");
        assert_eq!(exit_code(&cfg.unwrap_err()), EXIT_CONFIG);
        let parse = anyhow::Error::from(protodep::Error::Parse {
            line: 1,
            msg: "bad".into(),
        });
        assert_eq!(exit_code(&parse), EXIT_DATA);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), EXIT_DATA);
    }
}
