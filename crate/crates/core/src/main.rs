fn main() {
    std::process::exit(fragxsite::cli::main_with_args(std::env::args()));
}
