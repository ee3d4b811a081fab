fn main() {
    std::process::exit(noma_vlc::cli::main_with_args(std::env::args_os()));
}
