fn main() {
    std::process::exit(hlsp_cli::cli_main(std::env::args_os()));
}
