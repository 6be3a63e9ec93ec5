fn main() {
    std::process::exit(forminv_cli::run_main());
}
