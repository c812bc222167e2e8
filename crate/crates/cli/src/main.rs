fn main() {
    std::process::exit(retint_cli::main_with_args(std::env::args_os()));
}
