fn main() {
    std::process::exit(singconv_cli::run(std::env::args_os()));
}
