fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(psmgd::runner::cli::main_with_args(&args));
}
