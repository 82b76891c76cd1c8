use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(solembed_cli::cli::run(std::env::args_os()))
}
