fn main() {
    std::process::exit(sentigru_cli::run(std::env::args_os()));
}
