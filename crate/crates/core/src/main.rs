fn main() {
    std::process::exit(remtime::cli::run());
}
