fn main() {
    std::process::exit(opera::cli::run(std::env::args_os()));
}
