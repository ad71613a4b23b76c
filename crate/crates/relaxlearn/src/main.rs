fn main() {
    std::process::exit(relaxlearn::cli::run(std::env::args_os()));
}
