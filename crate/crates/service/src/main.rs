fn main() {
    std::process::exit(inmt_service::cli::main(std::env::args_os()));
}
