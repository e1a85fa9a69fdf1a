fn main() {
    std::process::exit(qgkpz::cli::main_with(std::env::args().collect()));
}
