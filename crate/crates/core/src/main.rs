fn main() { std::process::exit(icid::cli::main()); }
