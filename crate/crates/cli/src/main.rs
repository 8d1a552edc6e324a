mod cli;
mod commands;
mod config;
mod error;
mod manifest;

use clap::Parser;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let args = cli::Cli::parse();
    if let Err(e) = commands::run(&args) {
        eprintln!("dsnet {}: {e}", args.command.name());
        std::process::exit(e.kind.exit_code());
    }
}
