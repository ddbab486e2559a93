fn main() {
    std::process::exit(drops::cli::run(std::env::args_os()));
}
