fn main() {
    std::process::exit(reftomo::cli::run(std::env::args_os()));
}
