fn main() {
    std::process::exit(sublap::cli::main_with_args(std::env::args_os()));
}
