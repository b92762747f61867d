fn main() {
    std::process::exit(sorkinlab::cli::main_with_args(std::env::args_os()));
}
