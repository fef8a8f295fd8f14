fn main() {
    std::process::exit(tempsync::cli::run(std::env::args_os()));
}
