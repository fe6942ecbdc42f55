fn main() {
    std::process::exit(ppinfer::cli::cli_main(std::env::args()));
}
