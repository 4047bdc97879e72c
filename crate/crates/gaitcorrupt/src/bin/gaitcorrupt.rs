use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(gaitcorrupt::cli::run(std::env::args_os()))
}
