fn main() {
    std::process::exit(stabgs::cli::main());
}
