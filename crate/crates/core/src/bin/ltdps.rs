fn main() {
    std::process::exit(ltdps::cli::run(std::env::args_os()));
}
