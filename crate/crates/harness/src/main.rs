fn main() {
    std::process::exit(sil_harness::run_cli(std::env::args_os()));
}
