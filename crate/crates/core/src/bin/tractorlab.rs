fn main() {
    std::process::exit(tractorlab::cli::main());
}
