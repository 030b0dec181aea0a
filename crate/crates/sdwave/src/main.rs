fn main() {
    std::process::exit(sdwave::run(std::env::args_os()));
}
