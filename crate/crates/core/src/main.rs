fn main() {
    std::process::exit(resilient_dml::cli::main_with_args(std::env::args_os()));
}
