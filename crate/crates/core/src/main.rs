fn main() {
    std::process::exit(vsgd::cli::main_with_args(std::env::args_os()));
}
