fn main() {
    std::process::exit(spancorr::cli::main_with_args(std::env::args_os()));
}
