fn main() {
    std::process::exit(dcik_cli::run(std::env::args_os()));
}
