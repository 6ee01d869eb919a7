fn main() {
    std::process::exit(scenegram::cli::run(std::env::args_os()));
}
