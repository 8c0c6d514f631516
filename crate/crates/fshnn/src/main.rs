fn main() {
    std::process::exit(fshnn::cli::run(std::env::args_os()));
}
