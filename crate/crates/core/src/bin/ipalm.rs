fn main() {
    std::process::exit(ipalm::harness::cli_main(std::env::args_os()));
}
