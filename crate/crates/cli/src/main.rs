fn main() {
    std::process::exit(cardbox_cli::main_with_args(std::env::args_os()));
}
