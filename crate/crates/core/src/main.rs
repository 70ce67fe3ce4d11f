fn main() {
    std::process::exit(igb_lab::cli::run_from_args(std::env::args_os()));
}
