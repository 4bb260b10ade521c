fn main() {
    std::process::exit(inwlr::cli::run_from(std::env::args_os()));
}
