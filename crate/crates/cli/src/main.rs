fn main() -> std::process::ExitCode {
    hsvm_cli::run_with_args(std::env::args_os())
}
