fn main() {
    std::process::exit(qillum::cli::main_with_args(std::env::args_os()));
}
