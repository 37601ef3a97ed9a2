fn main() {
    std::process::exit(branchruin::cli::main_with_args(std::env::args_os()));
}
