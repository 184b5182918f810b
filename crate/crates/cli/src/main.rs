fn main() {
    std::process::exit(icn_lab_cli::main_with(std::env::args_os()));
}
