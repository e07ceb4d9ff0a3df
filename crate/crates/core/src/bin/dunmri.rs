use std::process::ExitCode;

use clap::Parser;
use dunmri_core::cli::{cmd_gradcheck, run, Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    // A failed gradient check still prints its report line.
    if let Command::Gradcheck(args) = &cli.command {
        return match cmd_gradcheck(args) {
            Ok((line, report)) => {
                println!("{line}");
                if report.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::FAILURE
                }
            }
            Err(e) => fail(&e),
        };
    }
    match run(cli.command) {
        Ok(line) => {
            println!("{line}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &dunmri_core::Error) -> ExitCode {
    eprintln!("error: {}", e.to_string().replace('\n', " "));
    ExitCode::FAILURE
}
