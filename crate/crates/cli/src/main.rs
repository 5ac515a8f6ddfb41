fn main() {
    std::process::exit(evodyn_cli::run(std::env::args_os()));
}
