fn main() {
    std::process::exit(animc_cli::run());
}
