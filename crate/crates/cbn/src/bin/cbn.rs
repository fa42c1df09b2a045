fn main() {
    std::process::exit(cbn::cli::main_with_args(std::env::args_os()));
}
