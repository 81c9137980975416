fn main() {
    std::process::exit(adagpr::cli::run());
}
