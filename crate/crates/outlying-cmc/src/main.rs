fn main() {
    std::process::exit(outlying_cmc::run());
}
