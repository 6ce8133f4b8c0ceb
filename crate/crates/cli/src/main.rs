fn main() {
    std::process::exit(feplab_cli::run_cli(std::env::args_os()));
}
