fn main() {
    std::process::exit(kdml::cli::run(std::env::args_os()));
}
