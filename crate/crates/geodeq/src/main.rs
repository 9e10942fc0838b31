fn main() {
    std::process::exit(geodeq::cli::run());
}
