fn main() {
    std::process::exit(lienard_cli::run(std::env::args_os()));
}
