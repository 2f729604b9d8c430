fn main() {
    std::process::exit(transmon_parity::cli::main_with_args(std::env::args_os()));
}
