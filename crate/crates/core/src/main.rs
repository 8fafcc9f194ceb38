use clap::Parser;
use osserman_lab::cli::{run, Cli};

fn main() -> std::process::ExitCode {
    run(Cli::parse())
}
