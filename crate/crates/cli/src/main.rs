use clap::Parser;
use mimo_adhoc_cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
