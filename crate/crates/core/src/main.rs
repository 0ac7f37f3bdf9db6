fn main() {
    std::process::exit(orderpick::cli::run(std::env::args_os()));
}
