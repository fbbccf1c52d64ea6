use clap::Parser;
use comove::cli::{exit_code, run, Cli};

fn main() {
    if let Err(e) = run(Cli::parse()) {
        // Messages already carry their source context.
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}
