fn main() {
    std::process::exit(rfsd::cli::run(std::env::args_os()));
}
