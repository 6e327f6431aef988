fn main() {
    std::process::exit(asrec::cli::run(std::env::args_os()));
}
