fn main() {
    std::process::exit(ddsddp::cli::main_with_args(std::env::args_os()));
}
