fn main() {
    std::process::exit(gmshadow::cli::run_command(std::env::args_os()));
}
