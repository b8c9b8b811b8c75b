fn main() {
    std::process::exit(scolab::cli::parse_and_dispatch(std::env::args()));
}
