fn main() {
    std::process::exit(msgpm_cli::main_with_args(std::env::args_os()));
}
