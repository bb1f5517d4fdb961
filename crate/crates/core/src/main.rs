fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(taskroute::cli::cli_main(&args));
}
