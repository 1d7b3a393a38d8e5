fn main() {
    std::process::exit(sewdiff::cli::run(std::env::args_os()));
}
