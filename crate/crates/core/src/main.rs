fn main() {
    std::process::exit(filterlab::cli::run_command(std::env::args_os()));
}
