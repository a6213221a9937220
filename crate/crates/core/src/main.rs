use std::process::ExitCode;

fn main() -> ExitCode {
    fastvid::cli::main()
}
