fn main() {
    std::process::exit(locrand::cli::run(std::env::args_os()));
}
