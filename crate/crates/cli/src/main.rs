fn main() {
    std::process::exit(diner_cli::run(std::env::args_os()));
}
