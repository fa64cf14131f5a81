fn main() {
    std::process::exit(legogen::cli::run(std::env::args_os()));
}
