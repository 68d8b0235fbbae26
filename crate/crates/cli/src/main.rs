fn main() {
    std::process::exit(perfhom::run_cli(std::env::args_os()));
}
