fn main() {
    std::process::exit(qwork_cli::main_with_args(std::env::args_os()));
}
