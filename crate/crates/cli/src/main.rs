use clap::Parser;
use lindode_cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
