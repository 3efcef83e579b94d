fn main() {
    std::process::exit(mwad_core::cli::run(std::env::args_os()));
}
