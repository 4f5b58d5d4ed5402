use clap::Parser;

use maxent_core::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
