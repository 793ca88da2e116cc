fn main() {
    std::process::exit(pbooster::cli::main());
}
