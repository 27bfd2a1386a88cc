use std::process::ExitCode;

fn main() -> ExitCode {
    testkit::cli::main()
}
