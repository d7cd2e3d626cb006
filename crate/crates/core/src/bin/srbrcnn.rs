fn main() {
    std::process::exit(srbrcnn::evalcli::cli::run(std::env::args_os()));
}
