fn main() {
    std::process::exit(mdlab::cli::main_with_args(std::env::args_os()));
}
