fn main() {
    std::process::exit(mlcf::cli::run(std::env::args_os()));
}
