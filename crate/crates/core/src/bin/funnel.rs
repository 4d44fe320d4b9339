fn main() {
    std::process::exit(funnel_control::cli::main_with_args(std::env::args_os()));
}
