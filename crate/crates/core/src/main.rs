fn main() {
    std::process::exit(hgsurv::cli::run(std::env::args_os()));
}
