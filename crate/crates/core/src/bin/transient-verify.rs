fn main() {
    std::process::exit(transient_verify::cli::run(std::env::args_os()));
}
