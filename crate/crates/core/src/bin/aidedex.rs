fn main() {
    std::process::exit(aidedex::cli::main_with(std::env::args_os()));
}
