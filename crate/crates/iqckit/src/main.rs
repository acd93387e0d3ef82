use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(iqckit::cli::run(std::env::args()) as u8)
}
