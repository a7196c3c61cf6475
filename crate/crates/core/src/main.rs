fn main() {
    std::process::exit(kanfraud::cli::main_with_args(std::env::args_os()));
}
