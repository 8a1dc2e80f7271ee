fn main() { std::process::exit(ltune::cli::run(std::env::args().collect())); }
