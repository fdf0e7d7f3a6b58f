fn main() {
    std::process::exit(szego_spectral::cli::main_with(std::env::args_os()));
}
