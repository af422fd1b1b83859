fn main() {
    std::process::exit(serfati_cli::run(std::env::args_os()));
}
