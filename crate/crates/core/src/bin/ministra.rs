fn main() {
    // Placeholder until the driver lands.
    eprintln!("ERROR 1: no inputs given");
    std::process::exit(1);
}
