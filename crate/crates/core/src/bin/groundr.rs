fn main() {
    std::process::exit(groundr::cli::dispatch(std::env::args_os()));
}
