fn main() {
    std::process::exit(homogvi::cli::run(std::env::args_os()));
}
