fn main() {
    std::process::exit(civility_cli::run(std::env::args_os()));
}
