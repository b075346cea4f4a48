fn main() {
    std::process::exit(confrelax::cli::run(std::env::args_os()));
}
