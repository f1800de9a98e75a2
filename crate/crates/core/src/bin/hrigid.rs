fn main() {
    std::process::exit(hrigid::report::run(std::env::args_os()));
}
