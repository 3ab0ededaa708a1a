fn main() {
    std::process::exit(dtrgp::cli::cli_main(std::env::args_os()));
}
