fn main() {
    std::process::exit(supermult_cli::run_cli(std::env::args_os()));
}
