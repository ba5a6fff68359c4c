use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(softrbf::cli::run(std::env::args_os()))
}
