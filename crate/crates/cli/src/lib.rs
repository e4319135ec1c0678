//! Command-line pipeline over the `morphkit` library:
//! synth → fuse → register → build-model → fit → evaluate.
//!
//! Exit codes: 0 success, 1 stage failure, 2 missing input, 3 configuration
//! or usage error.

pub mod args;
pub mod config;
pub mod error;
pub mod manifest;
pub mod stages;

use std::path::PathBuf;

use args::{Cli, Command};
use config::PipelineConfig;
use error::CliError;
use stages::Context;

/// Effective configuration: file (or defaults) with flags folded in.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig, CliError> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    config.apply_flags(cli);
    config.validate()?;
    Ok(config)
}

/// Runs the selected command; returns the run manifest written.
pub fn run(cli: &Cli, config: PipelineConfig) -> Result<PathBuf, CliError> {
    let ctx = Context::new(cli.out.clone(), config);
    match &cli.command {
        Command::Synth => stages::synth(&ctx),
        Command::Fuse(args) => stages::fuse(&ctx, args),
        Command::Register => stages::register(&ctx),
        Command::BuildModel => stages::build_model(&ctx),
        Command::Fit => stages::fit(&ctx),
        Command::Evaluate => stages::evaluate(&ctx),
        Command::Pipeline => stages::pipeline(&ctx),
    }
}

/// Parses `MORPHKIT_THREADS`; `None` when unset.
pub fn thread_limit(value: Option<&str>) -> Result<Option<usize>, CliError> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => Err(CliError::Config(format!(
                "MORPHKIT_THREADS must be a positive integer, got {v:?}"
            ))),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn thread_limit_parses() {
        assert_eq!(thread_limit(None).unwrap(), None);
        assert_eq!(thread_limit(Some("3")).unwrap(), Some(3));
        for bad in ["0", "-1", "many"] {
            assert_eq!(thread_limit(Some(bad)).unwrap_err().exit_code(), 3);
        }
    }
}
