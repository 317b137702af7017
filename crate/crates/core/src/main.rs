fn main() {
    std::process::exit(bartlab::cli::main_with_args(std::env::args_os()));
}
