fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(aecif_cli::dispatch(&args));
}
