fn main() {
    std::process::exit(radial_dirac::cli::run(std::env::args_os()));
}
