fn main() {
    std::process::exit(posecontrast::cli::run(std::env::args_os()));
}
