fn main() {
    std::process::exit(ddim_cli::run(std::env::args_os()));
}
