// SPDX-License-Identifier: MIT OR Apache-2.0

use clap::Parser;
use tracing_subscriber::EnvFilter;

fn main() {
    let cli = steerlab::cli::Cli::parse();
    let default_level = if cli.quiet { "warn" } else { "info" };
    tracing_subscriber::fmt()
        .with_env_filter(
            EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default_level)),
        )
        .with_writer(std::io::stderr)
        .init();
    if let Err(e) = steerlab::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
