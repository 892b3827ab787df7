fn main() {
    std::process::exit(sent::cli::main());
}
