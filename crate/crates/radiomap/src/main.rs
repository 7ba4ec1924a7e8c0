fn main() {
    std::process::exit(radiomap::cli::main_with_args(std::env::args_os()));
}
