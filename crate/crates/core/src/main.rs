fn main() {
    std::process::exit(pmsearch::cli::run(std::env::args_os()));
}
