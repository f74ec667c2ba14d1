fn main() -> std::process::ExitCode {
    simple_structures::cli::run(std::env::args_os())
}
