fn main() {
    std::process::exit(vdpcm::io::cli_main(std::env::args_os()));
}
