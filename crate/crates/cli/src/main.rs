fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(divpref_cli::run(&args));
}
