fn main() {
    std::process::exit(acdlab_cli::main_with_args(std::env::args_os()));
}
