fn main() {
    std::process::exit(dynrec::cli::run(std::env::args_os()));
}
