fn main() {
    std::process::exit(ecograde::cli::main_with_args(std::env::args_os()));
}
