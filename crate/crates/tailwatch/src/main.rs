use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(tailwatch::cli::run(std::env::args_os()))
}
