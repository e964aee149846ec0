fn main() {
    std::process::exit(solv3d::cli::run(std::env::args_os()));
}
