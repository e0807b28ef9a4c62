fn main() {
    std::process::exit(decoupled_hands::cli::main());
}
