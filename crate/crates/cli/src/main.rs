use std::process::ExitCode;

use wavespec_cli::config::{parse_config, UsageError, OUT_ENV};
use wavespec_cli::run::{run, EXIT_USAGE};

fn main() -> ExitCode {
    let env_out = std::env::var_os(OUT_ENV).map(Into::into);
    match parse_config(std::env::args_os(), env_out) {
        Ok(cfg) => ExitCode::from(run(&cfg)),
        // Help and version exit 0, usage errors 2.
        Err(UsageError::Clap(e)) => e.exit(),
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(EXIT_USAGE)
        }
    }
}
