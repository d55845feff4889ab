use std::process::ExitCode;

fn main() -> ExitCode {
    catgen::cli::run(std::env::args_os())
}
