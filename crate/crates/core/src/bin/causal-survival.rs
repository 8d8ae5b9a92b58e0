fn main() {
    std::process::exit(causal_survival::cli::cli_main(std::env::args_os()));
}
