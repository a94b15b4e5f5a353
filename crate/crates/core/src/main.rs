fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(lanmsff::cli::run(&args));
}
