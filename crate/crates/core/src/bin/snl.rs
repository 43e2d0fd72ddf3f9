fn main() {
    std::process::exit(snl::cli::cli_main(std::env::args_os()));
}
