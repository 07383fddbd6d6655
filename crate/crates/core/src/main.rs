use std::process::ExitCode;

use clap::Parser;
use sdnsn::cli::{dispatch, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = dispatch(cli, &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code)
}
