fn main() {
    std::process::exit(hdcnet::cli::run(std::env::args_os()));
}
