fn main() {
    std::process::exit(lcmgap_cli::run(std::env::args_os()));
}
