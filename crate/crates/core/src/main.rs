fn main() {
    std::process::exit(cocoon_core::cli::run_cli(std::env::args_os()));
}
