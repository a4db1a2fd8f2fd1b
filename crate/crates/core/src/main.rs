fn main() {
    std::process::exit(lethe::cli::run(std::env::args_os()));
}
