fn main() {
    std::process::exit(fieldlab::cli::run(std::env::args_os()));
}
