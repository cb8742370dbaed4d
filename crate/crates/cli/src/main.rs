fn main() {
    std::process::exit(share_cli::main_with_args(std::env::args_os()));
}
