fn main() {
    std::process::exit(rovscope::cli::main_with_args(std::env::args_os()));
}
