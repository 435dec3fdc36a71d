fn main() {
    std::process::exit(affine_invariants::cli::run(std::env::args_os()));
}
