fn main() -> std::process::ExitCode {
    linked::cli::main_with(std::env::args_os())
}
