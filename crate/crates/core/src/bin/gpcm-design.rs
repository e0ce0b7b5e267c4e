fn main() {
    std::process::exit(gpcm_design::cli::run(std::env::args_os()));
}
