fn main() {
    std::process::exit(foamlab::cli::main_exit());
}
