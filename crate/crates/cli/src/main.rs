fn main() -> std::process::ExitCode {
    grnkan_cli::main_with_args(std::env::args_os())
}
