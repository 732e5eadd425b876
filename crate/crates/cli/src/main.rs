fn main() {
    std::process::exit(lbnet_cli::run(std::env::args_os()));
}
