fn main() {
    std::process::exit(mrock_cli::cli::run_from(std::env::args_os()));
}
