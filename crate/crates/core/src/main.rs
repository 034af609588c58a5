fn main() {
    std::process::exit(orthoreg::cli::run(std::env::args_os()));
}
