fn main() {
    std::process::exit(sice_cli::run(std::env::args_os()));
}
