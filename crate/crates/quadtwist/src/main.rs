fn main() {
    std::process::exit(quadtwist::cli::run(std::env::args_os()));
}
