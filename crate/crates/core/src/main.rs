fn main() {
    std::process::exit(pan_core::cli::cli_main(std::env::args_os()));
}
