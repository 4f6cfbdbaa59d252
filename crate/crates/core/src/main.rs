fn main() {
    std::process::exit(oppsim::cli::run_cli(std::env::args_os()));
}
