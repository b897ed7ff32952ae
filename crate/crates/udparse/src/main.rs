use std::process::exit;

fn main() {
    exit(udparse::cli::run(std::env::args_os()));
}
