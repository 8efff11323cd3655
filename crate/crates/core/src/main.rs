fn main() {
    std::process::exit(delayppl::cli::main_with_args(std::env::args_os()));
}
