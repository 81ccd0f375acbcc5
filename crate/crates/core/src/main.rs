fn main() {
    std::process::exit(superhedge::cli::main_impl());
}
