fn main() {
    std::process::exit(hqam::cli::main_entry());
}
