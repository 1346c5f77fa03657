fn main() {
    std::process::exit(incpoly::cli::main_from(std::env::args_os()));
}
