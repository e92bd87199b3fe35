fn main() {
    std::process::exit(circharm_cli::run(std::env::args_os()));
}
