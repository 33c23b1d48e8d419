fn main() {
    std::process::exit(slsblend_cli::run(std::env::args_os()));
}
