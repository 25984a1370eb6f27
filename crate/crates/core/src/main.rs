use std::process::ExitCode;

use clap::Parser;
use snpsvm::cli::{self, Cli};

fn main() -> ExitCode {
    let args = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match cli::run(args, &mut stdout) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("snpsvm: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
