fn main() {
    std::process::exit(ctecs::cli::run(std::env::args_os()));
}
