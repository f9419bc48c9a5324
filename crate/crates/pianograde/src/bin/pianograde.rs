fn main() {
    std::process::exit(pianograde::cli::run(std::env::args_os()));
}
