fn main() {
    std::process::exit(multirep::cli::run(std::env::args_os()));
}
