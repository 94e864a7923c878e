use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(overlapstat::cli::run(std::env::args_os()))
}
