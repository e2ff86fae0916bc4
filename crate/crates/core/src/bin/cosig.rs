fn main() {
    std::process::exit(cosig::cli::run(std::env::args_os()));
}
