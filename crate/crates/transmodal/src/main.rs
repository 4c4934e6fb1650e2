fn main() {
    std::process::exit(transmodal::cli::run(std::env::args_os()));
}
