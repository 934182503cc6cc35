fn main() {
    std::process::exit(caputo_hj::cli::main_with_args(std::env::args_os()));
}
