fn main() {
    std::process::exit(finsler::cli::run(std::env::args_os()));
}
