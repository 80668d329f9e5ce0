fn main() {
    std::process::exit(emofad::cli::run(std::env::args_os()));
}
