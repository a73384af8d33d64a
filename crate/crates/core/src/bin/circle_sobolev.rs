fn main() {
    std::process::exit(circle_sobolev::cli::run(std::env::args_os()));
}
