fn main() {
    std::process::exit(graspmap::cli::main());
}
