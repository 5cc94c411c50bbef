fn main() {
    if let Err(e) = kgmvar::cli::init_threads() {
        eprintln!("error: {e}");
        std::process::exit(kgmvar::cli::EXIT_USAGE);
    }
    std::process::exit(kgmvar::cli::main_with_args(std::env::args_os()));
}
