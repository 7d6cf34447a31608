fn main() {
    std::process::exit(hawkesn::cli::run());
}
