//! Binary entry point; all logic lives in the library crate.

use clap::Parser;

fn main() {
    let cli = visage_cli::Cli::parse();
    if let Err(err) = visage_cli::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}
