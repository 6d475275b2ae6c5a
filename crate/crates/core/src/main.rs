fn main() {
    std::process::exit(ghz_vsm::cli::main_with_args(std::env::args_os()));
}
