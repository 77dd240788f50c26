use std::process::ExitCode;

fn main() -> ExitCode {
    shb::cli::run()
}
