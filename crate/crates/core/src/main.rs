fn main() {
    std::process::exit(cloudalloc::cli::run_command(std::env::args_os()));
}
