use clap::Parser;
use gwtails::cli::Cli;
use gwtails::run::{execute, EXIT_PARAM};

fn main() {
    let cli = Cli::parse();
    let code = match cli.command.resolve() {
        Ok(config) => execute(&config),
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PARAM
        }
    };
    std::process::exit(code);
}
