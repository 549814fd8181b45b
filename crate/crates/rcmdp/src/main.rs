fn main() {
    std::process::exit(rcmdp::cli::run());
}
