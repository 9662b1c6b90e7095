use std::process::ExitCode;

use clap::Parser;
use tomo_bench::cli::Cli;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = cli.command.resolve().and_then(|cfg| tomo_bench::cli::execute(&cfg));
    match result {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
