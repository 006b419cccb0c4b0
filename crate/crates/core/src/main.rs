fn main() {
    std::process::exit(rte_accel::cli::run_cli(std::env::args_os()));
}
