fn main() {
    std::process::exit(hsps::cli::run(std::env::args_os()));
}
