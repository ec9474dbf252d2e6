fn main() {
    std::process::exit(vibediag::cli::run(std::env::args()));
}
