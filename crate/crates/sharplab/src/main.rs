fn main() {
    std::process::exit(sharplab::cli::run(std::env::args_os()));
}
