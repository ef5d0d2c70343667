fn main() {
    std::process::exit(nearwall_cli::main_with_args(std::env::args_os()));
}
