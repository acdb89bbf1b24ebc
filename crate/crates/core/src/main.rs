use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(tclpulse::cli::run(std::env::args_os()))
}
