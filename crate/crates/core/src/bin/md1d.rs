fn main() {
    std::process::exit(md1d::cli::run(std::env::args_os()));
}
