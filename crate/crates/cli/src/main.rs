use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(primerace_cli::run(std::env::args_os().collect()))
}
