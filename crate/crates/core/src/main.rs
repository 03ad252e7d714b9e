fn main() {
    std::process::exit(mapprior::cli::main_with_args(std::env::args_os()));
}
