fn main() {
    std::process::exit(lvae::cli::main_with_args(std::env::args_os()));
}
