fn main() {
    std::process::exit(intrinsic_affinity::cli::main_with_args(std::env::args_os()));
}
