fn main() {
    std::process::exit(pot4d::cli::run(std::env::args_os()));
}
