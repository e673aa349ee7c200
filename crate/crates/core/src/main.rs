fn main() {
    std::process::exit(spin2_ramsey::cli::main_with_args(std::env::args_os()));
}
