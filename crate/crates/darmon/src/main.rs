fn main() {
    std::process::exit(darmon::cli::main_entry());
}
