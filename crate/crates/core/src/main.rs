fn main() {
    std::process::exit(bfactory::cli::run_cli(std::env::args_os()));
}
