fn main() {
    std::process::exit(rllogo::evalcli::cli_main(std::env::args_os()));
}
