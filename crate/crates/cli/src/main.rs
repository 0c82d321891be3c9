fn main() {
    std::process::exit(stratshear_cli::main_with_args(std::env::args_os()));
}
