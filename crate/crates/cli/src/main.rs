use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;
use morphkit_cli::args::Cli;
use morphkit_cli::error::CliError;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(3),
            };
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            log::error!("{e}");
            eprintln!("morphkit: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    let config = morphkit_cli::resolve_config(cli);
    let level = config.as_ref().map_or("info", |c| c.log_level.as_str()).to_string();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let config = config?;
    let threads = morphkit_cli::thread_limit(std::env::var("MORPHKIT_THREADS").ok().as_deref())?;
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    let manifest = morphkit_cli::run(cli, config)?;
    log::info!("done; run manifest at {}", manifest.display());
    Ok(())
}
