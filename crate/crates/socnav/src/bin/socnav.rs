fn main() {
    std::process::exit(socnav::cli::main_entry());
}
