fn main() {
    std::process::exit(kmfg_cli::run(std::env::args_os()));
}
