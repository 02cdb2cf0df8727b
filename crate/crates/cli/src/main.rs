fn main() {
    std::process::exit(peridyn_cli::run(std::env::args_os()));
}
