use std::io::ErrorKind;

use branchsim_cli::args::Cli;
use branchsim_cli::CliError;
use clap::Parser;

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = branchsim_cli::run(cli) {
        if matches!(&e, CliError::Io(io) if io.kind() == ErrorKind::BrokenPipe) {
            return;
        }
        eprintln!("branchsim: {}", e.to_string().replace('\n', " "));
        std::process::exit(e.exit_code());
    }
}
