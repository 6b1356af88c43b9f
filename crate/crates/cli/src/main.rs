fn main() {
    std::process::exit(impulse_cli::run(std::env::args_os()));
}
