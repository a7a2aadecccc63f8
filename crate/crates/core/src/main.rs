fn main() {
    std::process::exit(speedcast::cli::run(std::env::args_os()));
}
