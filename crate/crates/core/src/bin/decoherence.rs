fn main() {
    std::process::exit(decoherence::cli::main_with(std::env::args_os()));
}
