fn main() {
    std::process::exit(extkm_cli::run(std::env::args_os()));
}
