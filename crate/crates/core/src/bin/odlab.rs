fn main() {
    std::process::exit(orlicz_dirichlet::cli::main_with_args(std::env::args_os()));
}
