fn main() {
    std::process::exit(covsel::cli::run(std::env::args_os()));
}
