use std::process::ExitCode;

use clap::Parser;

use heatlab_cli::commands::{configure_threads, run, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match configure_threads().and_then(|_| run(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("heatlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
