fn main() {
    std::process::exit(csplab::run_cli(std::env::args_os()));
}
