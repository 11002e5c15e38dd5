fn main() {
    std::process::exit(manifold_mc::cli::run());
}
