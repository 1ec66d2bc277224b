fn main() {
    std::process::exit(dfe::cli::cli_main(std::env::args_os()));
}
