fn main() {
    std::process::exit(rfkr::cli::run(std::env::args_os()));
}
